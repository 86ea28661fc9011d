#include "dtree/relay/hub.hpp"

#include <algorithm>
#include <deque>
#include <unordered_map>

#include "dtree/digest.hpp"
#include "dtree/error.hpp"

namespace dtree::relay {

using Steady = std::chrono::steady_clock;

namespace {

std::int64_t steady_ns() { return Steady::now().time_since_epoch().count(); }

[[noreturn]] void rethrow_agent_error(const Message& m) {
  const std::string code = m.payload.value("code", "ProtocolError");
  const std::string text = m.payload.value("message", "");
  auto errc = parse_errc(code);
  if (errc && (*errc == Errc::RemotePathRejected || *errc == Errc::NotFound || *errc == Errc::IoError)) {
    fail(*errc, text);
  }
  fail(Errc::ProtocolError, code + ": " + text);
}

}  // namespace

/// Inbox for one in-flight request.
struct RelayHub::Request {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Message> inbox;
  std::size_t capacity = 1;
  bool session_closed = false;
  bool abandoned = false;  // consumer gone or stalled; drop further messages
};

struct RelayHub::Session {
  explicit Session(std::unique_ptr<Stream> s) : stream(std::move(s)) {}

  std::unique_ptr<Stream> stream;
  UserId account;
  std::string agent_id;
  std::atomic<std::int64_t> last_seen{steady_ns()};
  std::atomic<bool> closed{false};
  std::atomic<bool> finished{false};

  std::mutex write_mu;
  std::mutex req_mu;
  std::unordered_map<std::uint64_t, std::shared_ptr<Request>> requests;

  void send(const Message& m) {
    std::lock_guard lock(write_mu);
    write_message(*stream, m);
  }

  void touch() { last_seen = steady_ns(); }

  std::shared_ptr<Request> open_request(std::uint64_t corr, std::size_t capacity) {
    auto r = std::make_shared<Request>();
    r->capacity = capacity;
    std::lock_guard lock(req_mu);
    if (closed) {
      r->session_closed = true;
    } else {
      requests.emplace(corr, r);
    }
    return r;
  }

  /// Tells the agent to give up on a transfer. Best effort.
  void cancel(std::uint64_t corr) {
    if (closed) return;
    try {
      send(Message{MsgType::FetchCancel, corr, nlohmann::json::object()});
    } catch (const std::exception&) {
    }
  }

  void close_request(std::uint64_t corr) {
    std::shared_ptr<Request> r;
    {
      std::lock_guard lock(req_mu);
      auto it = requests.find(corr);
      if (it == requests.end()) return;
      r = it->second;
      requests.erase(it);
    }
    std::lock_guard lock(r->mu);
    r->abandoned = true;
    r->cv.notify_all();
  }

  void close() {
    if (closed.exchange(true)) return;
    stream->shutdown();
    std::unordered_map<std::uint64_t, std::shared_ptr<Request>> pending;
    {
      std::lock_guard lock(req_mu);
      pending.swap(requests);
    }
    for (auto& [corr, r] : pending) {
      std::lock_guard lock(r->mu);
      r->session_closed = true;
      r->cv.notify_all();
    }
  }
};

// ---------------------------------------------------------------------------
// FetchStream

struct FetchStream::Impl {
  std::shared_ptr<RelayHub::Session> session;
  std::shared_ptr<RelayHub::Request> request;
  std::uint64_t corr = 0;
  std::chrono::milliseconds idle_timeout{};
};

FetchStream::FetchStream(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

FetchStream::~FetchStream() {
  if (!done_) {
    impl_->session->close_request(impl_->corr);
    impl_->session->cancel(impl_->corr);
  }
}

std::optional<std::string> FetchStream::next() {
  if (done_) return std::nullopt;
  auto& req = *impl_->request;
  Message m;
  {
    std::unique_lock lock(req.mu);
    bool ready = req.cv.wait_for(lock, impl_->idle_timeout, [&] { return !req.inbox.empty() || req.session_closed; });
    if (!ready || req.inbox.empty()) {
      failed_ = true;
      lock.unlock();
      impl_->session->close_request(impl_->corr);
      impl_->session->cancel(impl_->corr);
      done_ = true;
      fail(Errc::TransferTimeout, (ready ? "agent disconnected" : "agent went silent") + std::string(" after ") +
                                      std::to_string(bytes_) + " bytes (partial)");
    }
    m = std::move(req.inbox.front());
    req.inbox.pop_front();
    req.cv.notify_all();
  }
  auto finish = [&] {
    done_ = true;
    impl_->session->close_request(impl_->corr);
  };
  switch (m.type) {
    case MsgType::FetchChunk: {
      const auto seq = m.payload.value("seq", std::uint64_t{0});
      if (seq != next_seq_) {
        failed_ = true;
        finish();
        fail(Errc::ProtocolError, "chunk out of order");
      }
      ++next_seq_;
      // The slot is free again; hand the agent one more credit.
      try {
        impl_->session->send(Message{MsgType::FetchAck, impl_->corr, nlohmann::json{{"credit", 1}}});
      } catch (const std::exception&) {
      }
      std::string data = base64_decode(m.payload.value("data", ""));
      bytes_ += data.size();
      return data;
    }
    case MsgType::FetchEnd: {
      finish();
      if (m.payload.value("size", std::uint64_t{0}) != bytes_) {
        failed_ = true;
        fail(Errc::ProtocolError, "size mismatch at end of transfer");
      }
      return std::nullopt;
    }
    case MsgType::Error:
      failed_ = true;
      finish();
      rethrow_agent_error(m);
    default:
      failed_ = true;
      finish();
      fail(Errc::ProtocolError, "unexpected " + std::string(msg_type_name(m.type)) + " during fetch");
  }
}

// ---------------------------------------------------------------------------
// RelayHub

RelayHub::RelayHub(Authenticator auth, RelayConfig config) : auth_(std::move(auth)), config_(config) {}

RelayHub::~RelayHub() { stop(); }

void RelayHub::serve(std::unique_ptr<Listener> listener) {
  listener_ = std::move(listener);
  accept_thread_ = std::thread([this] { accept_loop(); });
  reap_thread_ = std::thread([this] { reap_loop(); });
}

void RelayHub::stop() {
  if (stopping_.exchange(true)) return;
  if (listener_) listener_->close();
  {
    std::lock_guard lock(mu_);
    stop_cv_.notify_all();
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  if (reap_thread_.joinable()) reap_thread_.join();
  std::vector<std::shared_ptr<Session>> conns;
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    conns = connections_;
    threads.swap(conn_threads_);
  }
  for (auto& c : conns) c->close();
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

void RelayHub::accept_loop() {
  while (!stopping_) {
    auto stream = listener_->accept();
    if (!stream) break;
    auto session = std::make_shared<Session>(std::move(stream));
    std::lock_guard lock(mu_);
    if (stopping_) {
      session->close();
      break;
    }
    // Drop bookkeeping for connections that have ended.
    std::erase_if(connections_, [](const auto& c) { return c->finished.load(); });
    connections_.push_back(session);
    conn_threads_.emplace_back([this, session] { run_connection(session); });
  }
}

bool RelayHub::stale(const Session& s) const {
  const auto limit = std::chrono::duration_cast<std::chrono::nanoseconds>(config_.heartbeat_interval) *
                     config_.missed_heartbeats;
  return steady_ns() - s.last_seen.load() > limit.count();
}

void RelayHub::reap_loop() {
  const auto period = std::max<std::chrono::milliseconds>(config_.heartbeat_interval / 4, std::chrono::milliseconds{5});
  std::unique_lock lock(mu_);
  while (!stopping_) {
    stop_cv_.wait_for(lock, period);
    if (stopping_) break;
    std::vector<std::shared_ptr<Session>> dead;
    for (const auto& [key, s] : sessions_) {
      if (stale(*s)) dead.push_back(s);
    }
    lock.unlock();
    for (auto& s : dead) s->close();
    lock.lock();
  }
}

void RelayHub::run_connection(const std::shared_ptr<Session>& s) {
  bool registered = false;
  try {
    auto hello = read_message(*s->stream);
    if (!hello || hello->type != MsgType::Hello) {
      if (hello) s->send(error_message(hello->correlation_id, "ProtocolError", "expected HELLO"));
      s->close();
    } else if (hello->payload.value("version", 0) != kProtocolVersion) {
      s->send(error_message(hello->correlation_id, "ProtocolError", "unsupported protocol version"));
      s->close();
    } else {
      const std::string token = hello->payload.value("token", "");
      const std::string agent_id = hello->payload.value("agent_id", "");
      auto account = auth_(token);
      bool agent_ok = true;
      try {
        validate_agent_id(agent_id);
      } catch (const Error&) {
        agent_ok = false;
      }
      if (!account) {
        s->send(error_message(hello->correlation_id, "AuthFailed", "invalid or expired token"));
        s->close();
      } else if (!agent_ok) {
        s->send(error_message(hello->correlation_id, "ProtocolError", "bad agent id"));
        s->close();
      } else {
        s->account = *account;
        s->agent_id = agent_id;
        std::shared_ptr<Session> superseded;
        {
          std::lock_guard lock(mu_);
          auto& slot = sessions_[{s->account, s->agent_id}];
          superseded = slot;
          slot = s;
          registered = true;
        }
        if (superseded) superseded->close();
        s->touch();
        s->send(Message{MsgType::HelloOk, hello->correlation_id,
                        nlohmann::json{{"agent_id", agent_id},
                                       {"version", kProtocolVersion},
                                       {"heartbeat_interval_ms", config_.heartbeat_interval.count()}}});
        while (!s->closed) {
          auto m = read_message(*s->stream);
          if (!m) break;
          s->touch();
          route(*s, std::move(*m));
        }
      }
    }
  } catch (const std::exception&) {
    // Protocol violation or broken stream: the session simply ends.
  }
  s->close();
  if (registered) {
    std::lock_guard lock(mu_);
    auto it = sessions_.find({s->account, s->agent_id});
    if (it != sessions_.end() && it->second == s) sessions_.erase(it);
  }
  s->finished = true;
}

void RelayHub::route(Session& s, Message m) {
  switch (m.type) {
    case MsgType::Ping:
      s.send(Message{MsgType::Pong, m.correlation_id, nlohmann::json::object()});
      return;
    case MsgType::Pong:
      return;
    case MsgType::ListResp:
    case MsgType::FetchChunk:
    case MsgType::FetchEnd:
    case MsgType::Error:
      break;
    default:
      s.send(error_message(m.correlation_id, "ProtocolError", "unexpected message from agent"));
      return;
  }
  std::shared_ptr<Request> r;
  {
    std::lock_guard lock(s.req_mu);
    auto it = s.requests.find(m.correlation_id);
    if (it == s.requests.end()) return;  // cancelled or unknown
    r = it->second;
  }
  std::unique_lock lock(r->mu);
  if (r->abandoned || s.closed) return;
  // The agent may not run ahead of the credit it was given. The reader never
  // waits here, so heartbeats and other transfers keep flowing.
  if (r->inbox.size() >= r->capacity) {
    lock.unlock();
    s.close_request(m.correlation_id);
    s.cancel(m.correlation_id);
    return;
  }
  r->inbox.push_back(std::move(m));
  r->cv.notify_all();
}

std::shared_ptr<RelayHub::Session> RelayHub::live_session(UserId account, std::string_view agent_id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find({account, std::string(agent_id)});
  if (it == sessions_.end() || it->second->closed || stale(*it->second)) return nullptr;
  return it->second;
}

bool RelayHub::is_live(UserId account, std::string_view agent_id) const {
  return live_session(account, agent_id) != nullptr;
}

std::size_t RelayHub::live_sessions() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(sessions_.begin(), sessions_.end(), [this](const auto& kv) {
    return !kv.second->closed && !stale(*kv.second);
  }));
}

std::vector<RemoteEntry> RelayHub::list(UserId account, std::string_view agent_id, std::string_view share,
                                        std::string_view path) {
  validate_relative_path(path);
  auto s = live_session(account, agent_id);
  if (!s) fail(Errc::AgentOffline, std::string(agent_id));
  const std::uint64_t corr = next_corr_++;
  auto req = s->open_request(corr, 1);
  try {
    s->send(Message{MsgType::ListReq, corr, nlohmann::json{{"share", share}, {"path", path}}});
  } catch (const std::exception&) {
    s->close_request(corr);
    fail(Errc::AgentOffline, std::string(agent_id));
  }
  Message m;
  {
    std::unique_lock lock(req->mu);
    bool ready = req->cv.wait_for(lock, config_.list_timeout, [&] { return !req->inbox.empty() || req->session_closed; });
    if (!ready || req->inbox.empty()) {
      lock.unlock();
      s->close_request(corr);
      if (ready) fail(Errc::AgentOffline, "agent disconnected");
      fail(Errc::TransferTimeout, "listing timed out");
    }
    m = std::move(req->inbox.front());
  }
  s->close_request(corr);
  if (m.type == MsgType::Error) rethrow_agent_error(m);
  if (m.type != MsgType::ListResp || !m.payload.contains("entries") || !m.payload["entries"].is_array()) {
    fail(Errc::ProtocolError, "bad listing response");
  }
  std::vector<RemoteEntry> out;
  for (const auto& e : m.payload["entries"]) {
    RemoteEntry r;
    r.name = e.value("name", "");
    r.kind = e.value("kind", "file") == "dir" ? EntryKind::Dir : EntryKind::File;
    r.size = r.kind == EntryKind::Dir ? 0 : e.value("size", std::uint64_t{0});
    r.modified = from_micros(e.value("modified", std::int64_t{0}));
    r.availability = Availability::Live;
    out.push_back(std::move(r));
  }
  return out;
}

std::unique_ptr<FetchStream> RelayHub::fetch(UserId account, std::string_view agent_id, std::string_view share,
                                             std::string_view path) {
  validate_relative_path(path);
  auto s = live_session(account, agent_id);
  if (!s) fail(Errc::AgentOffline, std::string(agent_id));
  const std::uint64_t corr = next_corr_++;
  auto impl = std::make_unique<FetchStream::Impl>();
  impl->session = s;
  // Room for a full window of chunks plus the closing FETCH_END or ERROR.
  impl->request = s->open_request(corr, std::max<std::size_t>(config_.fetch_window, 1) + 1);
  impl->corr = corr;
  impl->idle_timeout = config_.fetch_idle_timeout;
  std::unique_ptr<FetchStream> stream(new FetchStream(std::move(impl)));
  try {
    s->send(Message{MsgType::FetchReq, corr,
                    nlohmann::json{{"share", share},
                                   {"path", path},
                                   {"chunk_size", config_.chunk_size},
                                   {"window", std::max<std::size_t>(config_.fetch_window, 1)}}});
  } catch (const std::exception&) {
    fail(Errc::AgentOffline, std::string(agent_id));
  }
  return stream;
}

}  // namespace dtree::relay
