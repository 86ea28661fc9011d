#include "dtree/relay/agent.hpp"

#include <fstream>

#include "dtree/digest.hpp"
#include "dtree/error.hpp"

namespace dtree::relay {

namespace fs = std::filesystem;

namespace {

bool inside(const fs::path& root, const fs::path& p) {
  auto r = root.begin();
  auto q = p.begin();
  for (; r != root.end(); ++r, ++q) {
    if (q == p.end() || *r != *q) return false;
  }
  return true;
}

Timestamp to_timestamp(fs::file_time_type t) {
  auto sys = fs::file_time_type::clock::to_sys(t);
  return std::chrono::time_point_cast<std::chrono::microseconds>(sys);
}

}  // namespace

ShareFs::ShareFs(std::map<std::string, fs::path> shares) {
  for (auto& [label, dir] : shares) {
    std::error_code ec;
    auto canon = fs::canonical(dir, ec);
    shares_.emplace(label, ec ? dir : canon);
  }
}

fs::path ShareFs::resolve(const std::string& share, const std::string& rel) const {
  validate_relative_path(rel);
  auto it = shares_.find(share);
  if (it == shares_.end()) fail(Errc::NotFound, "no share " + share);
  ++accesses_;
  std::error_code ec;
  fs::path target = rel.empty() ? it->second : fs::weakly_canonical(it->second / rel, ec);
  if (ec) fail(Errc::NotFound, rel);
  if (!inside(it->second, target)) fail(Errc::RemotePathRejected, "escapes share");
  return target;
}

std::vector<RemoteEntry> ShareFs::list(const std::string& share, const std::string& rel) const {
  fs::path dir = resolve(share, rel);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(Errc::NotFound, rel);
  std::vector<RemoteEntry> out;
  for (const auto& de : fs::directory_iterator(dir, ec)) {
    RemoteEntry e;
    e.name = de.path().filename().string();
    std::error_code sec;
    // Symlinks pointing out of the share are listed but not followed.
    auto canon = fs::canonical(de.path(), sec);
    if (sec || !inside(shares_.at(share), canon)) continue;
    e.kind = fs::is_directory(canon, sec) ? EntryKind::Dir : EntryKind::File;
    e.size = e.kind == EntryKind::File ? fs::file_size(canon, sec) : 0;
    if (sec) e.size = 0;
    auto mt = fs::last_write_time(canon, sec);
    e.modified = sec ? Timestamp{} : to_timestamp(mt);
    out.push_back(std::move(e));
  }
  if (ec) fail(Errc::IoError, ec.message());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

fs::path ShareFs::open_file(const std::string& share, const std::string& rel) const {
  fs::path p = resolve(share, rel);
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) fail(Errc::NotFound, rel);
  return p;
}

// ---------------------------------------------------------------------------

Agent::Agent(AgentConfig config, AgentFaults faults)
    : config_(std::move(config)), faults_(faults), fs_(config_.shares) {}

Agent::~Agent() { stop(); }

void Agent::send(const Message& m) {
  if (frozen()) return;
  std::lock_guard lock(write_mu_);
  write_message(*stream_, m);
}

void Agent::attach(std::unique_ptr<Stream> stream) {
  join_all();
  stream_ = std::move(stream);
  frozen_ = false;
  chunks_sent_ = 0;
  write_message(*stream_, Message{MsgType::Hello, next_corr_++,
                                  nlohmann::json{{"version", kProtocolVersion},
                                                 {"token", config_.token},
                                                 {"agent_id", config_.agent_id}}});
  // The handshake reply is read on a helper so a silent server cannot wedge us.
  std::optional<Message> reply;
  std::exception_ptr err;
  bool done = false;
  std::thread t([&] {
    try {
      reply = read_message(*stream_);
    } catch (...) {
      err = std::current_exception();
    }
    std::lock_guard lock(mu_);
    done = true;
    cv_.notify_all();
  });
  {
    std::unique_lock lock(mu_);
    if (!cv_.wait_for(lock, config_.handshake_timeout, [&] { return done; })) {
      lock.unlock();
      stream_->shutdown();
      t.join();
      fail(Errc::ProtocolError, "handshake timed out");
    }
  }
  t.join();
  if (err) std::rethrow_exception(err);
  if (!reply) fail(Errc::ProtocolError, "connection closed during handshake");
  if (reply->type == MsgType::Error) {
    stream_->shutdown();
    const std::string code = reply->payload.value("code", "");
    fail(code == "AuthFailed" ? Errc::AuthFailed : Errc::ProtocolError, reply->payload.value("message", ""));
  }
  if (reply->type != MsgType::HelloOk) fail(Errc::ProtocolError, "expected HELLO_OK");
  connected_ = true;
  reader_ = std::thread([this] { read_loop(); });
  pinger_ = std::thread([this] { ping_loop(); });
}

void Agent::read_loop() {
  try {
    while (!stopping_) {
      auto m = read_message(*stream_);
      if (!m) break;
      handle(*m);
    }
  } catch (const std::exception&) {
  }
  connected_ = false;
  std::lock_guard lock(mu_);
  cv_.notify_all();
}

void Agent::ping_loop() {
  std::unique_lock lock(mu_);
  while (!stopping_ && connected_) {
    cv_.wait_for(lock, config_.heartbeat_interval);
    if (stopping_ || !connected_) break;
    lock.unlock();
    try {
      send(Message{MsgType::Ping, next_corr_++, nlohmann::json::object()});
    } catch (const std::exception&) {
      stream_->shutdown();
    }
    lock.lock();
  }
}

void Agent::handle(const Message& m) {
  switch (m.type) {
    case MsgType::Pong:
      return;
    case MsgType::Ping:
      send(Message{MsgType::Pong, m.correlation_id, nlohmann::json::object()});
      return;
    case MsgType::ListReq: {
      try {
        auto entries = fs_.list(m.payload.value("share", ""), m.payload.value("path", ""));
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& e : entries) {
          arr.push_back(nlohmann::json{{"name", e.name},
                                       {"kind", e.kind == EntryKind::Dir ? "dir" : "file"},
                                       {"size", e.size},
                                       {"modified", to_micros(e.modified)}});
        }
        send(Message{MsgType::ListResp, m.correlation_id, nlohmann::json{{"entries", std::move(arr)}}});
      } catch (const Error& e) {
        send(error_message(m.correlation_id, errc_name(e.code()), e.detail()));
      }
      return;
    }
    case MsgType::FetchReq: {
      std::lock_guard lock(mu_);
      Credit& c = credits_[m.correlation_id];
      // Servers that do not advertise a window get an unthrottled stream.
      if (m.payload.contains("window")) {
        c.available = m.payload.value("window", std::size_t{1});
      } else {
        c.unlimited = true;
      }
      workers_.emplace_back([this, m] { serve_fetch(m); });
      return;
    }
    case MsgType::FetchAck:
    case MsgType::FetchCancel: {
      std::lock_guard lock(mu_);
      auto it = credits_.find(m.correlation_id);
      if (it == credits_.end()) return;
      if (m.type == MsgType::FetchAck) {
        it->second.available += m.payload.value("credit", std::size_t{0});
      } else {
        it->second.cancelled = true;
      }
      cv_.notify_all();
      return;
    }
    default:
      send(error_message(m.correlation_id, "ProtocolError", "unexpected message"));
  }
}

bool Agent::take_credit(std::uint64_t corr) {
  std::unique_lock lock(mu_);
  auto& c = credits_[corr];
  cv_.wait(lock, [&] { return stopping_ || !connected_ || c.cancelled || c.unlimited || c.available > 0; });
  if (stopping_ || !connected_ || c.cancelled) return false;
  if (!c.unlimited) --c.available;
  return true;
}

void Agent::serve_fetch(Message m) {
  struct Forget {
    Agent& a;
    std::uint64_t corr;
    ~Forget() {
      std::lock_guard lock(a.mu_);
      a.credits_.erase(corr);
    }
  } forget{*this, m.correlation_id};
  try {
    fs::path p = fs_.open_file(m.payload.value("share", ""), m.payload.value("path", ""));
    std::size_t chunk = m.payload.value("chunk_size", std::size_t{64U << 10U});
    chunk = std::clamp<std::size_t>(chunk, 1, 4U << 20U);
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open file");
    std::string buf(chunk, '\0');
    std::uint64_t seq = 0;
    std::uint64_t total = 0;
    while (!stopping_) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      auto n = static_cast<std::size_t>(in.gcount());
      if (n == 0) break;
      if (!take_credit(m.correlation_id)) return;
      const auto sent = chunks_sent_.load();
      if (faults_.freeze_after_chunks && sent >= *faults_.freeze_after_chunks) frozen_ = true;
      if (faults_.drop_after_chunks && sent >= *faults_.drop_after_chunks) {
        stream_->shutdown();
        return;
      }
      send(Message{MsgType::FetchChunk, m.correlation_id,
                   nlohmann::json{{"seq", seq++}, {"data", base64_encode(std::string_view(buf.data(), n))}}});
      ++chunks_sent_;
      total += n;
      if (n < buf.size()) break;
    }
    send(Message{MsgType::FetchEnd, m.correlation_id, nlohmann::json{{"size", total}, {"chunks", seq}}});
  } catch (const Error& e) {
    try {
      send(error_message(m.correlation_id, errc_name(e.code()), e.detail()));
    } catch (const std::exception&) {
    }
  } catch (const std::exception&) {
    // write failed: connection is gone
  }
}

void Agent::wait() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !connected_ || stopping_; });
}

void Agent::join_all() {
  if (stream_) stream_->shutdown();
  {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }
  if (reader_.joinable()) reader_.join();
  if (pinger_.joinable()) pinger_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

void Agent::stop() {
  stopping_ = true;
  join_all();
  connected_ = false;
}

void Agent::run(const std::function<std::unique_ptr<Stream>()>& dial, std::chrono::milliseconds max_backoff) {
  std::chrono::milliseconds backoff{200};
  while (!stopping_) {
    try {
      attach(dial());
      backoff = std::chrono::milliseconds{200};
      wait();
    } catch (const Error& e) {
      if (e.code() == Errc::AuthFailed) throw;
    } catch (const std::exception&) {
    }
    if (stopping_) break;
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, backoff, [&] { return stopping_.load(); });
    backoff = std::min(backoff * 2, max_backoff);
  }
}

}  // namespace dtree::relay
