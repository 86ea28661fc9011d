#include <doctest.h>

#include <fstream>
#include <random>

#include "dtree/error.hpp"
#include "dtree/snapshot.hpp"
#include "observe.hpp"
#include "random_ops.hpp"
#include "support.hpp"

using namespace dtree;
using namespace dtree::testing;

namespace {

std::optional<Errc> load_error(const std::filesystem::path& p) {
  try {
    (void)load_state(p);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

}  // namespace

TEST_SUITE("snapshot") {
  TEST_CASE("empty state round-trips") {
    TempDir tmp;
    World a;
    save_state(a.core.snapshot(), tmp / "s.json");
    World b;
    b.core.replace_state(load_state(tmp / "s.json"));
    CHECK(observe(a.core) == observe(b.core));
  }

  TEST_CASE("random states round-trip") {
    for (std::uint64_t seed : {1U, 2U, 3U, 4U}) {
      std::mt19937_64 rng(seed);
      World a;
      OpDriver drv{a, rng};
      for (int i = 0; i < 200; ++i) drv.step();
      CHECK(drv.succeeded > 50);
      TempDir tmp;
      save_state(a.core.snapshot(), tmp / "s.json");
      World b;
      b.core.replace_state(load_state(tmp / "s.json"));
      CAPTURE(seed);
      CHECK(observe(a.core) == observe(b.core));
    }
  }

  TEST_CASE("blobs are stored once by digest") {
    TempDir tmp;
    World w;
    auto u = w.user("alice");
    auto d = w.core.create_directory(kRootId, "d", u).id;
    ArticleDraft draft{"t", "a", "b", {{"x.bin", "same"}}};
    w.core.publish_article(d, u, draft);
    draft.attachments = {{"y.bin", "same"}};
    w.core.publish_article(d, u, draft);
    save_state(w.core.snapshot(), tmp / "s.json");
    int blobs = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(tmp / "blobs")) ++blobs;
    CHECK(blobs == 1);
  }

  TEST_CASE("login works after reload and old tokens do not") {
    TempDir tmp;
    World a;
    a.user("alice");
    auto token = a.core.login("alice", kPassword);
    save_state(a.core.snapshot(), tmp / "s.json");
    World b;
    b.core.replace_state(load_state(tmp / "s.json"));
    CHECK_FALSE(b.core.authenticate(token).has_value());
    auto t2 = b.core.login("alice", kPassword);
    CHECK(b.core.authenticate(t2).has_value());
    CHECK_THROWS_AS(b.core.register_user("ALICE", kPassword), Error);
  }

  TEST_CASE("truncation is detected") {
    TempDir tmp;
    std::mt19937_64 rng(11);
    World w;
    OpDriver drv{w, rng};
    for (int i = 0; i < 100; ++i) drv.step();
    save_state(w.core.snapshot(), tmp / "s.json");
    auto full = slurp(tmp / "s.json");
    for (std::size_t cut : {std::size_t{0}, std::size_t{1}, full.size() / 3, full.size() / 2, full.size() - 2}) {
      spit(tmp / "t.json", full.substr(0, cut));
      CAPTURE(cut);
      CHECK(load_error(tmp / "t.json") == Errc::CorruptSnapshot);
    }
  }

  TEST_CASE("missing blob is detected") {
    TempDir tmp;
    World w;
    auto u = w.user("alice");
    auto d = w.core.create_directory(kRootId, "d", u).id;
    w.core.publish_article(d, u, ArticleDraft{"t", "a", "b", {{"x.bin", "payload"}}});
    save_state(w.core.snapshot(), tmp / "s.json");
    std::filesystem::remove_all(tmp / "blobs");
    CHECK(load_error(tmp / "s.json") == Errc::CorruptSnapshot);
  }

  TEST_CASE("schema version mismatch") {
    TempDir tmp;
    World w;
    save_state(w.core.snapshot(), tmp / "s.json");
    auto j = json::parse(slurp(tmp / "s.json"));
    j["schema_version"] = kSnapshotSchemaVersion + 1;
    spit(tmp / "s.json", j.dump());
    CHECK(load_error(tmp / "s.json") == Errc::SchemaVersionMismatch);
  }

  TEST_CASE("missing file is an IoError") {
    TempDir tmp;
    CHECK(load_error(tmp / "nope.json") == Errc::IoError);
  }

  TEST_CASE("a crash before rename leaves the previous snapshot intact") {
    TempDir tmp;
    World w;
    w.user("alice");
    save_state(w.core.snapshot(), tmp / "s.json");
    auto before = observe(w.core);
    w.user("bob");
    SaveOptions crash;
    crash.before_rename = [] { throw std::runtime_error("power cut"); };
    CHECK_THROWS(save_state(w.core.snapshot(), tmp / "s.json", crash));
    World b;
    b.core.replace_state(load_state(tmp / "s.json"));
    CHECK(observe(b.core) == before);
  }
}
