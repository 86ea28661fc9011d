#include "dtree/http_api.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <thread>
#include <tuple>

#include "dtree/digest.hpp"
#include "dtree/json_codec.hpp"

namespace dtree {

int http_status(Errc code) {
  switch (code) {
    case Errc::NotFound:
    case Errc::ParentNotFound:
    case Errc::UserNotFound:
    case Errc::NoSuchApplication:
      return 404;
    case Errc::PermissionDenied:
    case Errc::NotOwner:
      return 403;
    case Errc::AuthFailed:
    case Errc::Unauthenticated:
      return 401;
    case Errc::InvalidName:
    case Errc::InvalidTitle:
    case Errc::InvalidArgument:
    case Errc::WeakPassword:
    case Errc::EmptyQuery:
    case Errc::EmptyTerm:
    case Errc::InvalidMode:
    case Errc::AttachmentTooLarge:
    case Errc::RemotePathRejected:
      return 400;
    case Errc::AgentOffline:
      return 503;
    case Errc::TransferTimeout:
      return 504;
    case Errc::ProtocolError:
      return 502;
    case Errc::IoError:
    case Errc::SchemaVersionMismatch:
    case Errc::CorruptSnapshot:
      return 500;
    default:
      return 409;
  }
}

const std::vector<Endpoint>& api_endpoints() {
  static const std::vector<Endpoint> kEndpoints = {
      {"POST", "/api/register"},
      {"POST", "/api/login"},
      {"GET", "/api/dirs"},
      {"POST", "/api/dirs"},
      {"GET", "/api/dirs/{id}"},
      {"DELETE", "/api/dirs/{id}"},
      {"GET", "/api/dirs/{id}/children"},
      {"GET", "/api/dirs/{id}/bar"},
      {"POST", "/api/dirs/{id}/trash"},
      {"POST", "/api/dirs/{id}/restore"},
      {"POST", "/api/dirs/{id}/matrix"},
      {"POST", "/api/dirs/{id}/grants/users"},
      {"POST", "/api/dirs/{id}/grants/groups"},
      {"POST", "/api/dirs/{id}/visibility"},
      {"POST", "/api/dirs/{id}/join"},
      {"GET", "/api/dirs/{id}/applications"},
      {"POST", "/api/dirs/{id}/applications/{uid}"},
      {"POST", "/api/dirs/{id}/blacklist/{uid}"},
      {"DELETE", "/api/dirs/{id}/members/{uid}"},
      {"GET", "/api/dirs/{id}/articles"},
      {"POST", "/api/dirs/{id}/articles"},
      {"GET", "/api/a/{article_id}"},
      {"GET", "/api/a/{article_id}/attachments/{name}"},
      {"GET", "/api/search"},
      {"POST", "/api/dirs/{id}/mounts"},
      {"GET", "/api/dirs/{id}/mounts/entries"},
      {"GET", "/api/mounts/{binding}/file"},
      {"DELETE", "/api/mounts/{binding}"},
  };
  return kEndpoints;
}

bool endpoint_matches(const Endpoint& e, std::string_view method, std::string_view path) {
  if (e.method != method) return false;
  std::string_view pat = e.pattern;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < pat.size() && j <= path.size()) {
    if (pat[i] == '{') {
      i = pat.find('}', i) + 1;
      std::size_t end = path.find('/', j);
      if (end == std::string_view::npos) end = path.size();
      if (end == j) return false;
      j = end;
    } else {
      if (j >= path.size() || pat[i] != path[j]) return false;
      ++i;
      ++j;
    }
  }
  return i == pat.size() && j == path.size();
}

namespace {

using httplib::Request;
using httplib::Response;

void send_json(Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(Response& res, int status, std::string_view code, std::string_view message) {
  send_json(res, json{{"error", code}, {"message", message}}, status);
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) fail(Errc::InvalidArgument, std::string(what) + " must be numeric");
  return v;
}

json parse_body(const Request& req) {
  if (req.body.empty()) return json::object();
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) fail(Errc::InvalidArgument, "request body must be a JSON object");
  return j;
}

template <typename T>
T field(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end()) fail(Errc::InvalidArgument, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    fail(Errc::InvalidArgument, std::string("bad type for field '") + key + "'");
  }
}

template <typename T>
T field_or(const json& body, const char* key, T fallback) {
  if (!body.contains(key)) return fallback;
  return field<T>(body, key);
}

json account_json(const UserAccount& a) { return json{{"id", a.id.value()}, {"username", a.username}}; }

json view_json(const DomainToolView& v) {
  json children = json::array();
  for (const auto& c : v.children) children.push_back(directory_to_json(c));
  json out{{"directory", directory_to_json(v.dir)},
           {"bar", bar_to_json(v.bar)},
           {"bar_text", render_bar(v.bar)},
           {"children", std::move(children)},
           {"roles", roles_to_json(v.viewer_roles)},
           {"is_member", v.viewer_is_member},
           {"is_pending", v.viewer_is_pending}};
  if (v.owner_panel) {
    out["group"] = group_to_json(v.owner_panel->group);
    out["grants"] = grants_to_json(v.owner_panel->grants);
  }
  return out;
}

}  // namespace

struct ApiServer::Impl {
  Core& core;
  MountService* mounts;
  ApiOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> bound{false};

  Impl(Core& c, MountService* m, ApiOptions o) : core(c), mounts(m), options(std::move(o)) {
    server.new_task_queue = [n = options.worker_threads] { return new httplib::ThreadPool(n); };
    server.set_exception_handler([](const Request&, Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), errc_name(e.code()), e.detail());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    });
    if (options.static_dir) server.set_mount_point("/", options.static_dir->string());
    routes();
  }

  UserId user_of(const Request& req) {
    std::string header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) fail(Errc::Unauthenticated, "missing bearer token");
    auto user = core.authenticate(std::string_view(header).substr(prefix.size()));
    if (!user) fail(Errc::Unauthenticated, "invalid or expired token");
    return *user;
  }

  UserId lookup_user(std::string_view ref) {
    if (!ref.empty() && std::all_of(ref.begin(), ref.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      UserId id{parse_u64(ref, "user")};
      if (!core.account(id)) fail(Errc::UserNotFound, std::string(ref));
      return id;
    }
    auto acc = core.account_by_name(ref);
    if (!acc) fail(Errc::UserNotFound, std::string(ref));
    return acc->id;
  }

  UserId user_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end()) fail(Errc::InvalidArgument, std::string("missing field '") + key + "'");
    if (it->is_number_unsigned()) return lookup_user(std::to_string(it->get<std::uint64_t>()));
    if (it->is_string()) return lookup_user(it->get<std::string>());
    fail(Errc::InvalidArgument, std::string("bad type for field '") + key + "'");
  }

  static DirectoryId dir_of(const Request& req, std::size_t i = 1) {
    return DirectoryId{parse_u64(req.matches[i].str(), "directory id")};
  }

  MountService& mount_service() {
    if (!mounts) fail(Errc::AgentOffline, "mount relay is not configured");
    return *mounts;
  }

  void routes();
};

void ApiServer::Impl::routes() {
  auto& s = server;

  s.Post("/api/register", [this](const Request& req, Response& res) {
    auto body = parse_body(req);
    auto acc = core.register_user(field<std::string>(body, "username"), field<std::string>(body, "password"));
    send_json(res, account_json(acc), 201);
  });

  s.Post("/api/login", [this](const Request& req, Response& res) {
    auto body = parse_body(req);
    auto username = field<std::string>(body, "username");
    auto token = core.login(username, field<std::string>(body, "password"));
    auto acc = core.account_by_name(username);
    send_json(res, json{{"token", token}, {"user", account_json(*acc)}});
  });

  s.Get("/api/dirs", [this](const Request& req, Response& res) {
    send_json(res, view_json(core.domain_tool_view(kRootId, user_of(req))));
  });

  s.Post("/api/dirs", [this](const Request& req, Response& res) {
    auto user = user_of(req);
    auto body = parse_body(req);
    auto d = core.create_directory(DirectoryId{field<std::uint64_t>(body, "parent")},
                                   field<std::string>(body, "name"), user);
    send_json(res, directory_to_json(d), 201);
  });

  s.Get(R"(/api/dirs/(\d+))", [this](const Request& req, Response& res) {
    send_json(res, view_json(core.domain_tool_view(dir_of(req), user_of(req))));
  });

  s.Delete(R"(/api/dirs/(\d+))", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    core.delete_directory(dir, user_of(req));
    send_json(res, json{{"deleted", dir.value()}});
  });

  s.Get(R"(/api/dirs/(\d+)/children)", [this](const Request& req, Response& res) {
    json out = json::array();
    for (const auto& c : core.list_children(dir_of(req), user_of(req))) out.push_back(directory_to_json(c));
    send_json(res, json{{"children", std::move(out)}});
  });

  s.Get(R"(/api/dirs/(\d+)/bar)", [this](const Request& req, Response& res) {
    auto bar = core.navigator_path_for(dir_of(req), user_of(req));
    send_json(res, json{{"bar", bar_to_json(bar)}, {"bar_text", render_bar(bar)}});
  });

  s.Post(R"(/api/dirs/(\d+)/trash)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto user = user_of(req);
    core.trash_directory(dir, user);
    send_json(res, directory_to_json(core.directory(dir)));
  });

  s.Post(R"(/api/dirs/(\d+)/restore)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto user = user_of(req);
    core.restore_directory(dir, user);
    send_json(res, directory_to_json(core.directory(dir)));
  });

  // Either a full "matrix", or "allow"/"deny" lists of {role, right} applied
  // to the current one. An empty body just returns the directory.
  s.Post(R"(/api/dirs/(\d+)/matrix)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto user = user_of(req);
    auto body = parse_body(req);
    std::optional<AuthMatrix> full;
    if (body.contains("matrix")) full = matrix_from_json(body["matrix"]);
    std::vector<std::tuple<Role, Right, bool>> cells;
    for (const char* key : {"allow", "deny"}) {
      for (const auto& c : field_or<json>(body, key, json::array())) {
        auto role = parse_role(field<std::string>(c, "role"));
        auto right = parse_right(field<std::string>(c, "right"));
        if (!role || !right) fail(Errc::InvalidArgument, "unknown role or right");
        cells.emplace_back(*role, *right, std::string_view(key) == "allow");
      }
    }
    auto d = core.update_matrix(dir, user, [&](AuthMatrix& m) {
      if (full) m = *full;
      for (const auto& [role, right, on] : cells) m.set(role, right, on);
    });
    send_json(res, directory_to_json(d));
  });

  s.Post(R"(/api/dirs/(\d+)/grants/users)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto body = parse_body(req);
    auto target = user_field(body, "user");
    auto action = field_or<std::string>(body, "action", "grant");
    if (action == "grant") {
      core.grant_user(dir, actor, target);
    } else if (action == "revoke") {
      core.revoke_user(dir, actor, target);
    } else {
      fail(Errc::InvalidArgument, "action must be grant or revoke");
    }
    send_json(res, json{{"directory", dir.value()}, {"user", target.value()}, {"action", action}});
  });

  s.Post(R"(/api/dirs/(\d+)/grants/groups)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto body = parse_body(req);
    DirectoryId group{field<std::uint64_t>(body, "group")};
    auto action = field_or<std::string>(body, "action", "grant");
    if (action == "grant") {
      core.grant_group(dir, actor, group);
    } else if (action == "revoke") {
      core.revoke_group(dir, actor, group);
    } else {
      fail(Errc::InvalidArgument, "action must be grant or revoke");
    }
    send_json(res, json{{"directory", dir.value()}, {"group", group.value()}, {"action", action}});
  });

  s.Post(R"(/api/dirs/(\d+)/visibility)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto body = parse_body(req);
    core.set_visibility(dir, actor, parse_visibility(field<std::string>(body, "visibility")));
    send_json(res, directory_to_json(core.directory(dir)));
  });

  s.Post(R"(/api/dirs/(\d+)/join)", [this](const Request& req, Response& res) {
    auto outcome = core.join(dir_of(req), user_of(req));
    send_json(res, json{{"outcome", outcome == JoinOutcome::Joined ? "Joined" : "ApplicationPending"}});
  });

  s.Get(R"(/api/dirs/(\d+)/applications)", [this](const Request& req, Response& res) {
    json out = json::array();
    for (const auto& p : core.pending_applications(dir_of(req), user_of(req))) {
      auto acc = core.account(p.user);
      out.push_back(json{{"user", p.user.value()},
                         {"username", acc ? acc->username : ""},
                         {"applied_at", to_micros(p.applied_at)}});
    }
    send_json(res, json{{"applications", std::move(out)}});
  });

  s.Post(R"(/api/dirs/(\d+)/applications/([^/]+))", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto applicant = lookup_user(req.matches[2].str());
    auto decision = field<std::string>(parse_body(req), "decision");
    if (decision != "permit" && decision != "refuse") fail(Errc::InvalidArgument, "decision must be permit or refuse");
    core.review_application(dir, actor, applicant, decision == "permit" ? Decision::Permit : Decision::Refuse);
    send_json(res, json{{"directory", dir.value()}, {"user", applicant.value()}, {"decision", decision}});
  });

  s.Post(R"(/api/dirs/(\d+)/blacklist/([^/]+))", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto target = lookup_user(req.matches[2].str());
    auto action = field_or<std::string>(parse_body(req), "action", "add");
    if (action == "add") {
      core.blacklist_user(dir, actor, target);
    } else if (action == "remove") {
      core.unblacklist_user(dir, actor, target);
    } else {
      fail(Errc::InvalidArgument, "action must be add or remove");
    }
    send_json(res, json{{"directory", dir.value()}, {"user", target.value()}, {"action", action}});
  });

  s.Delete(R"(/api/dirs/(\d+)/members/([^/]+))", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto target = lookup_user(req.matches[2].str());
    core.remove_member(dir, actor, target);
    send_json(res, json{{"directory", dir.value()}, {"removed", target.value()}});
  });

  s.Get(R"(/api/dirs/(\d+)/articles)", [this](const Request& req, Response& res) {
    json out = json::array();
    for (const auto& a : core.list_articles(dir_of(req), user_of(req))) out.push_back(article_summary_to_json(a));
    send_json(res, json{{"articles", std::move(out)}});
  });

  s.Post(R"(/api/dirs/(\d+)/articles)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto author = user_of(req);
    auto body = parse_body(req);
    ArticleDraft draft;
    draft.title = field<std::string>(body, "title");
    draft.abstract = field_or<std::string>(body, "abstract", "");
    draft.body = field_or<std::string>(body, "body", "");
    for (const auto& att : field_or<json>(body, "attachments", json::array())) {
      draft.attachments.emplace_back(field<std::string>(att, "filename"),
                                     base64_decode(field<std::string>(att, "content_base64")));
    }
    send_json(res, article_summary_to_json(core.publish_article(dir, author, std::move(draft))), 201);
  });

  s.Get(R"(/api/a/(\d+))", [this](const Request& req, Response& res) {
    ArticleId id{parse_u64(req.matches[1].str(), "article id")};
    send_json(res, article_to_json(core.get_article(id, user_of(req))));
  });

  s.Get(R"(/api/a/(\d+)/attachments/([^/]+))", [this](const Request& req, Response& res) {
    ArticleId id{parse_u64(req.matches[1].str(), "article id")};
    auto blob = core.get_attachment(id, req.matches[2].str(), user_of(req));
    res.set_content(*blob, "application/octet-stream");
  });

  s.Get("/api/search", [this](const Request& req, Response& res) {
    auto user = user_of(req);
    std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "DIR";
    auto q = make_query(req.get_param_value("q"), parse_mode(mode), user);
    json hits = json::array();
    for (const auto& h : core.execute_search(q)) hits.push_back(hit_to_json(h));
    send_json(res, json{{"mode", mode}, {"hits", std::move(hits)}});
  });

  s.Post(R"(/api/dirs/(\d+)/mounts)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto actor = user_of(req);
    auto body = parse_body(req);
    auto b = core.bind_mount(dir, actor, field<std::string>(body, "agent_id"), field<std::string>(body, "share"));
    auto out = binding_to_json(b);
    out["label"] = core.mount_label(b);
    send_json(res, out, 201);
  });

  s.Get(R"(/api/dirs/(\d+)/mounts/entries)", [this](const Request& req, Response& res) {
    auto dir = dir_of(req);
    auto viewer = user_of(req);
    json out = json::array();
    for (const auto& e : mount_service().list_mount_entries(dir, viewer, req.get_param_value("path"))) {
      out.push_back(entry_to_json(e));
    }
    send_json(res, json{{"entries", std::move(out)}});
  });

  s.Get(R"(/api/mounts/(\d+)/file)", [this](const Request& req, Response& res) {
    BindingId binding{parse_u64(req.matches[1].str(), "binding id")};
    auto viewer = user_of(req);
    std::shared_ptr<relay::FetchStream> stream =
        mount_service().fetch_mounted_file(binding, viewer, req.get_param_value("path"));
    // The status is committed only once the agent has produced its first
    // chunk, so refusals and early timeouts still map to error statuses.
    auto first = std::make_shared<std::optional<std::string>>(stream->next());
    res.status = 200;
    res.set_chunked_content_provider("application/octet-stream",
                                     [stream, first](std::size_t, httplib::DataSink& sink) {
                                       try {
                                         std::optional<std::string> chunk;
                                         if (*first) {
                                           chunk = std::move(*first);
                                           first->reset();
                                         } else {
                                           chunk = stream->next();
                                         }
                                         if (!chunk) {
                                           sink.done();
                                           return true;
                                         }
                                         return sink.write(chunk->data(), chunk->size());
                                       } catch (const std::exception&) {
                                         return false;  // aborts the response mid-stream
                                       }
                                     });
  });

  s.Delete(R"(/api/mounts/(\d+))", [this](const Request& req, Response& res) {
    BindingId binding{parse_u64(req.matches[1].str(), "binding id")};
    core.unbind_mount(binding, user_of(req));
    send_json(res, json{{"deleted", binding.value()}});
  });

  s.set_error_handler([](const Request&, Response& res) {
    if (res.body.empty()) {
      send_error(res, res.status, res.status == 404 ? "NotFound" : "HttpError", "no such endpoint");
    }
  });
}

ApiServer::ApiServer(Core& core, MountService* mounts, ApiOptions options)
    : impl_(std::make_unique<Impl>(core, mounts, std::move(options))) {}

ApiServer::~ApiServer() { stop(); }

void ApiServer::set_request_observer(std::function<void(const std::string&, const std::string&)> observer) {
  impl_->server.set_logger(
      [obs = std::move(observer)](const httplib::Request& req, const httplib::Response&) { obs(req.method, req.path); });
}

std::uint16_t ApiServer::bind(const std::string& host, std::uint16_t port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) fail(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return static_cast<std::uint16_t>(bound);
}

void ApiServer::run() { impl_->server.listen_after_bind(); }

std::uint16_t ApiServer::start(const std::string& host, std::uint16_t port) {
  auto p = bind(host, port);
  impl_->thread = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
  return p;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dtree
