#pragma once

#include <atomic>
#include <chrono>

#include "dtree/ids.hpp"

namespace dtree {

class Clock {
 public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  [[nodiscard]] Timestamp now() const override {
    return std::chrono::time_point_cast<std::chrono::microseconds>(std::chrono::system_clock::now());
  }
};

/// Test clock. Each call to now() advances by `tick` so consecutive events get
/// strictly increasing timestamps unless tick is zero.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = from_micros(1'500'000'000'000'000),
                       std::chrono::microseconds tick = std::chrono::microseconds{1})
      : now_(to_micros(start)), tick_(tick.count()) {}

  [[nodiscard]] Timestamp now() const override { return from_micros(now_.fetch_add(tick_)); }
  void advance(std::chrono::microseconds d) { now_.fetch_add(d.count()); }

 private:
  mutable std::atomic<std::int64_t> now_;
  std::int64_t tick_;
};

}  // namespace dtree
