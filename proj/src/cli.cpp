#include "dtree/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dtree/digest.hpp"
#include "dtree/json_codec.hpp"
#include "dtree/relay/agent.hpp"

namespace dtree::cli {

namespace fs = std::filesystem;

const std::vector<VerbRoute>& verb_table() {
  static const std::vector<VerbRoute> kTable = {
      {"register", {"POST", "/api/register"}, ""},
      {"login", {"POST", "/api/login"}, ""},
      {"dir create", {"POST", "/api/dirs"}, ""},
      {"dir ls", {"GET", "/api/dirs"}, ""},
      {"dir ls", {"GET", "/api/dirs/{id}"}, ""},
      {"dir ls", {"GET", "/api/dirs/{id}/children"}, "brief"},
      {"dir bar", {"GET", "/api/dirs/{id}/bar"}, ""},
      {"dir rm", {"DELETE", "/api/dirs/{id}"}, ""},
      {"dir trash", {"POST", "/api/dirs/{id}/trash"}, ""},
      {"dir restore", {"POST", "/api/dirs/{id}/restore"}, ""},
      {"dir matrix", {"POST", "/api/dirs/{id}/matrix"}, ""},
      {"dir grant", {"POST", "/api/dirs/{id}/grants/users"}, ""},
      {"dir grant", {"POST", "/api/dirs/{id}/grants/groups"}, ""},
      {"dir visibility", {"POST", "/api/dirs/{id}/visibility"}, ""},
      {"group join", {"POST", "/api/dirs/{id}/join"}, ""},
      {"group pending", {"GET", "/api/dirs/{id}/applications"}, ""},
      {"group permit", {"POST", "/api/dirs/{id}/applications/{uid}"}, "decision=permit"},
      {"group refuse", {"POST", "/api/dirs/{id}/applications/{uid}"}, "decision=refuse"},
      {"group kick", {"DELETE", "/api/dirs/{id}/members/{uid}"}, ""},
      {"group blacklist", {"POST", "/api/dirs/{id}/blacklist/{uid}"}, ""},
      {"article publish", {"POST", "/api/dirs/{id}/articles"}, ""},
      {"article ls", {"GET", "/api/dirs/{id}/articles"}, ""},
      {"article get", {"GET", "/api/a/{article_id}"}, ""},
      {"article get", {"GET", "/api/a/{article_id}/attachments/{name}"}, "attachment"},
      {"search", {"GET", "/api/search"}, ""},
      {"mount bind", {"POST", "/api/dirs/{id}/mounts"}, ""},
      {"mount ls", {"GET", "/api/dirs/{id}/mounts/entries"}, ""},
      {"mount fetch", {"GET", "/api/mounts/{binding}/file"}, ""},
      {"mount unbind", {"DELETE", "/api/mounts/{binding}"}, ""},
  };
  return kTable;
}

const std::vector<std::string>& verbs() {
  static const std::vector<std::string> kVerbs = [] {
    std::vector<std::string> v;
    for (const auto& r : verb_table()) {
      if (std::find(v.begin(), v.end(), r.verb) == v.end()) v.push_back(r.verb);
    }
    v.emplace_back("agent run");
    return v;
  }();
  return kVerbs;
}

fs::path default_profile_path() {
  if (const char* p = std::getenv("DTREE_CONFIG"); p && *p) return p;
  if (const char* x = std::getenv("XDG_CONFIG_HOME"); x && *x) return fs::path(x) / "dtree" / "profile.json";
  const char* home = std::getenv("HOME");
  return fs::path(home && *home ? home : ".") / ".config" / "dtree" / "profile.json";
}

namespace {

struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConnectionFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ApiFailure : std::runtime_error {
  int status;
  std::string code;
  ApiFailure(int s, std::string c, const std::string& message)
      : std::runtime_error(message), status(s), code(std::move(c)) {}
};

struct Profile {
  std::string server = "http://127.0.0.1:8080";
  std::string token;
  std::string username;
  std::string format = "table";
};

Profile load_profile(const fs::path& path) {
  Profile p;
  std::ifstream in(path);
  if (!in) return p;
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return p;
  p.server = j.value("server", p.server);
  p.token = j.value("token", "");
  p.username = j.value("username", "");
  p.format = j.value("format", p.format);
  return p;
}

void save_profile(const fs::path& path, const Profile& p) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::string text =
      json{{"server", p.server}, {"token", p.token}, {"username", p.username}, {"format", p.format}}.dump(2) + "\n";
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) throw std::runtime_error("cannot write profile " + path.string());
  ::fchmod(fd, 0600);
  std::size_t off = 0;
  while (off < text.size()) {
    auto n = ::write(fd, text.data() + off, text.size() - off);
    if (n <= 0) {
      ::close(fd);
      throw std::runtime_error("cannot write profile " + path.string());
    }
    off += static_cast<std::size_t>(n);
  }
  ::close(fd);
}

std::string encode_segment(std::string_view s) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4U];
      out += kHex[c & 15U];
    }
  }
  return out;
}

class Api {
 public:
  Api(const std::string& server, std::string token) : client_(server), token_(std::move(token)) {
    if (!client_.is_valid()) throw ConnectionFailure("invalid server URL " + server);
    client_.set_connection_timeout(5);
    client_.set_read_timeout(120);
  }

  json get(const std::string& path, const httplib::Params& params = {}) {
    return check(client_.Get(path, params, headers()));
  }
  json post(const std::string& path, const json& body = json::object()) {
    return check(client_.Post(path, headers(), body.dump(), "application/json"));
  }
  json del(const std::string& path) { return check(client_.Delete(path, headers())); }

  /// Streams a binary response body into `sink`.
  void download(const std::string& path, const httplib::Params& params, std::ostream& sink) {
    int status = 0;
    std::string error_body;
    auto res = client_.Get(
        path, params, headers(),
        [&](const httplib::Response& r) {
          status = r.status;
          return true;
        },
        [&](const char* data, std::size_t n) {
          if (status == 200) {
            sink.write(data, static_cast<std::streamsize>(n));
          } else {
            error_body.append(data, n);
          }
          return true;
        });
    if (!res) {
      if (status == 200) throw ApiFailure(0, "TransferTimeout", "transfer interrupted");
      throw ConnectionFailure(httplib::to_string(res.error()));
    }
    if (status != 200) throw failure_from(status, error_body);
  }

 private:
  httplib::Headers headers() const {
    httplib::Headers h;
    if (!token_.empty()) h.emplace("Authorization", "Bearer " + token_);
    return h;
  }

  static ApiFailure failure_from(int status, const std::string& body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_object()) return ApiFailure(status, j.value("error", "HttpError"), j.value("message", ""));
    return ApiFailure(status, "HttpError", body);
  }

  json check(const httplib::Result& res) {
    if (!res) throw ConnectionFailure(httplib::to_string(res.error()));
    if (res->status >= 400) throw failure_from(res->status, res->body);
    auto j = json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw ApiFailure(res->status, "ProtocolError", "server sent invalid JSON");
    return j;
  }

  httplib::Client client_;
  std::string token_;
};

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// A directory reference: a numeric id, or a path "ALL/name/name".
std::uint64_t resolve_dir(Api& api, const std::string& ref) {
  if (all_digits(ref)) return std::stoull(ref);
  std::vector<std::string> parts;
  std::stringstream ss(ref);
  for (std::string part; std::getline(ss, part, '/');) {
    if (!part.empty()) parts.push_back(part);
  }
  if (parts.empty() || fold_case(parts[0]) != fold_case(kRootName)) {
    throw UsageFailure("directory reference must be an id or a path starting with ALL: " + ref);
  }
  std::uint64_t cur = kRootId.value();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    auto children = api.get("/api/dirs/" + std::to_string(cur) + "/children")["children"];
    auto it = std::find_if(children.begin(), children.end(), [&](const json& c) {
      return fold_case(c["name"].get<std::string>()) == fold_case(parts[i]);
    });
    if (it == children.end()) throw ApiFailure(404, "NotFound", "no directory " + parts[i] + " in " + ref);
    cur = (*it)["id"].get<std::uint64_t>();
  }
  return cur;
}

std::string dir_path(std::uint64_t id) { return "/api/dirs/" + std::to_string(id); }

std::string bar_text(const json& bar) {
  std::string out;
  for (const auto& seg : bar) {
    if (!out.empty()) out += " / ";
    out += seg["name"].get<std::string>();
  }
  return out;
}

std::pair<Role, Right> parse_cell(const std::string& s) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageFailure("matrix cell must be role:right, got " + s);
  auto role = parse_role(s.substr(0, colon));
  auto right = parse_right(s.substr(colon + 1));
  if (!role || !right) throw UsageFailure("unknown role or right in " + s);
  return {*role, *right};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageFailure("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Printer {
 public:
  Printer(std::ostream& out, bool jsonl) : out_(out), jsonl_(jsonl) {}

  void record(std::string_view type, json body, const std::string& line) {
    if (jsonl_) {
      body["type"] = type;
      out_ << body.dump() << '\n';
    } else {
      out_ << line << '\n';
    }
  }

  [[nodiscard]] bool jsonl() const { return jsonl_; }

 private:
  std::ostream& out_;
  bool jsonl_;
};

std::string dir_line(const json& d) {
  return std::to_string(d["id"].get<std::uint64_t>()) + "\t" + d["name"].get<std::string>() +
         (d["state"] == "Trashed" ? "\t[trashed]" : "");
}

std::string matrix_table(const json& m) {
  std::ostringstream ss;
  ss << "role";
  for (Right r : kAllRights) ss << '\t' << right_name(r);
  for (Role role : kAllRoles) {
    ss << '\n' << role_name(role);
    for (Right r : kAllRights) {
      ss << '\t' << (m[std::string(role_name(role))][std::string(right_name(r))].get<bool>() ? "x" : "-");
    }
  }
  return ss.str();
}

struct Options {
  std::string config;
  std::string server;
  std::string token;
  std::string format;

  std::string a;
  std::string b;
  std::string c;
  std::string title;
  std::string abstract;
  std::string body;
  std::string body_file;
  std::string out_file;
  std::string attachment;
  std::string mode = "DIR";
  std::string path;
  std::string user;
  std::string group;
  std::string agent_id;
  std::string share;
  std::string relay;
  std::vector<std::string> attach;
  std::vector<std::string> allow;
  std::vector<std::string> deny;
  std::vector<std::string> shares;
  std::vector<std::string> labels;
  bool revoke = false;
  bool remove = false;
  bool brief = false;
  int heartbeat_ms = 10'000;
};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dtree: client for the directory tree service", "dtree"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Profile file");
  app.add_option("--server", o.server, "Server URL, e.g. http://127.0.0.1:8080");
  app.add_option("--token", o.token, "Session token (overrides the profile)");
  app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"table", "json-lines"}));

  std::string verb;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& desc, const std::string& full) {
    auto* sub = parent->add_subcommand(name, desc);
    sub->final_callback([&verb, full] { verb = full; });
    return sub;
  };

  auto* reg = leaf(&app, "register", "Create an account", "register");
  reg->add_option("username", o.a)->required();
  reg->add_option("password", o.b)->required();
  auto* login = leaf(&app, "login", "Log in and store the session token", "login");
  login->add_option("username", o.a)->required();
  login->add_option("password", o.b)->required();

  auto* dir = app.add_subcommand("dir", "Directories")->require_subcommand(1);
  auto* dcreate = leaf(dir, "create", "Create a subdirectory", "dir create");
  dcreate->add_option("parent", o.a, "Parent id or ALL/... path")->required();
  dcreate->add_option("name", o.b)->required();
  auto* dls = leaf(dir, "ls", "Show a directory and its visible children", "dir ls");
  dls->add_option("dir", o.a, "Id or ALL/... path (default: root)");
  dls->add_flag("--brief", o.brief, "Children only");
  leaf(dir, "bar", "Print the navigator bar", "dir bar")->add_option("dir", o.a)->required();
  leaf(dir, "rm", "Delete an empty directory", "dir rm")->add_option("dir", o.a)->required();
  leaf(dir, "trash", "Move a directory to the trash", "dir trash")->add_option("dir", o.a)->required();
  leaf(dir, "restore", "Restore a trashed directory", "dir restore")->add_option("dir", o.a)->required();
  auto* dmatrix = leaf(dir, "matrix", "Show or edit the authorization matrix", "dir matrix");
  dmatrix->add_option("dir", o.a)->required();
  dmatrix->add_option("--allow", o.allow, "role:right to switch on");
  dmatrix->add_option("--deny", o.deny, "role:right to switch off");
  auto* dgrant = leaf(dir, "grant", "Grant or revoke the grantUser/grantGroup role", "dir grant");
  dgrant->add_option("dir", o.a)->required();
  auto* guser = dgrant->add_option("--user", o.user, "User name or id");
  auto* ggroup = dgrant->add_option("--group", o.group, "Directory whose group is granted");
  guser->excludes(ggroup);
  dgrant->add_flag("--revoke", o.revoke);
  auto* dvis = leaf(dir, "visibility", "Set group visibility", "dir visibility");
  dvis->add_option("dir", o.a)->required();
  dvis->add_option("visibility", o.b)->required()->check(CLI::IsMember({"public", "private", "Public", "Private"}));

  auto* group = app.add_subcommand("group", "Directory groups")->require_subcommand(1);
  leaf(group, "join", "Join or apply to join", "group join")->add_option("dir", o.a)->required();
  leaf(group, "pending", "List pending applications", "group pending")->add_option("dir", o.a)->required();
  for (const char* name : {"permit", "refuse", "kick", "blacklist"}) {
    auto* g = leaf(group, name, std::string(name) + " a user", std::string("group ") + name);
    g->add_option("dir", o.a)->required();
    g->add_option("user", o.b, "User name or id")->required();
    if (std::string_view(name) == "blacklist") g->add_flag("--remove", o.remove, "Lift the blacklisting");
  }

  auto* article = app.add_subcommand("article", "Articles")->require_subcommand(1);
  auto* apub = leaf(article, "publish", "Publish an article", "article publish");
  apub->add_option("dir", o.a)->required();
  apub->add_option("--title", o.title)->required();
  apub->add_option("--abstract", o.abstract);
  auto* abody = apub->add_option("--body", o.body);
  apub->add_option("--body-file", o.body_file)->excludes(abody);
  apub->add_option("--attach", o.attach, "File to attach");
  leaf(article, "ls", "List articles", "article ls")->add_option("dir", o.a)->required();
  auto* aget = leaf(article, "get", "Show an article or save an attachment", "article get");
  aget->add_option("id", o.a)->required();
  aget->add_option("--attachment", o.attachment);
  aget->add_option("--out", o.out_file);

  auto* search = leaf(&app, "search", "Search directories or articles", "search");
  search->add_option("query", o.a);
  search->add_option("--mode", o.mode)->check(CLI::IsMember({"DIR", "KEY", "MY_DIR", "MY_KEY", "MY_ALL_DIR"}));

  auto* mount = app.add_subcommand("mount", "Mounted shares")->require_subcommand(1);
  auto* mbind = leaf(mount, "bind", "Bind an agent share to a directory", "mount bind");
  mbind->add_option("dir", o.a)->required();
  mbind->add_option("--agent", o.agent_id)->required();
  mbind->add_option("--share", o.share, "Share label exported by the agent")->required();
  auto* mls = leaf(mount, "ls", "List mounted entries", "mount ls");
  mls->add_option("dir", o.a)->required();
  mls->add_option("--path", o.path);
  auto* mfetch = leaf(mount, "fetch", "Fetch a file through the relay", "mount fetch");
  mfetch->add_option("binding", o.a)->required();
  mfetch->add_option("path", o.b)->required();
  mfetch->add_option("--out", o.out_file);
  leaf(mount, "unbind", "Remove a binding", "mount unbind")->add_option("binding", o.a)->required();

  auto* agent = app.add_subcommand("agent", "Mount agent")->require_subcommand(1);
  auto* arun = leaf(agent, "run", "Run the mount agent", "agent run");
  arun->add_option("--relay", o.relay, "Relay address host:port")->envname("DTREE_RELAY")->required();
  arun->add_option("--agent-id", o.agent_id)->required();
  arun->add_option("--share", o.shares, "Local directory to export")->required();
  arun->add_option("--label", o.labels, "Label for each --share")->required();
  arun->add_option("--heartbeat-ms", o.heartbeat_ms);

  std::vector<const char*> argv{"dtree"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  }

  const fs::path profile_path = o.config.empty() ? default_profile_path() : fs::path(o.config);
  Profile profile = load_profile(profile_path);
  if (o.server.empty()) {
    if (const char* s = std::getenv("DTREE_SERVER"); s && *s) o.server = s;
  }
  if (!o.server.empty()) profile.server = o.server;
  if (!o.token.empty()) profile.token = o.token;
  Printer print(out, (o.format.empty() ? profile.format : o.format) == "json-lines");
  Api api(profile.server, profile.token);

  if (verb == "register") {
    auto acc = api.post("/api/register", json{{"username", o.a}, {"password", o.b}});
    print.record("account", acc, "registered " + acc["username"].get<std::string>() + " (id " +
                                     std::to_string(acc["id"].get<std::uint64_t>()) + ")");
  } else if (verb == "login") {
    auto r = api.post("/api/login", json{{"username", o.a}, {"password", o.b}});
    profile.token = r["token"].get<std::string>();
    profile.username = o.a;
    if (!o.format.empty()) profile.format = o.format;
    save_profile(profile_path, profile);
    print.record("session", json{{"user", r["user"]}, {"server", profile.server}},
                 "logged in as " + o.a + " on " + profile.server);
  } else if (verb == "dir create") {
    auto d = api.post("/api/dirs", json{{"parent", resolve_dir(api, o.a)}, {"name", o.b}});
    print.record("directory", d, dir_line(d));
  } else if (verb == "dir ls") {
    if (o.brief) {
      auto id = o.a.empty() ? kRootId.value() : resolve_dir(api, o.a);
      for (const auto& c : api.get(dir_path(id) + "/children")["children"]) print.record("child", c, dir_line(c));
    } else {
      auto v = o.a.empty() ? api.get("/api/dirs") : api.get(dir_path(resolve_dir(api, o.a)));
      json head = v["directory"];
      head["bar_text"] = v["bar_text"];
      head["roles"] = v["roles"];
      head["is_member"] = v["is_member"];
      head["is_pending"] = v["is_pending"];
      print.record("directory", head, v["bar_text"].get<std::string>());
      for (const auto& c : v["children"]) print.record("child", c, "  " + dir_line(c));
    }
  } else if (verb == "dir bar") {
    auto r = api.get(dir_path(resolve_dir(api, o.a)) + "/bar");
    print.record("bar", r, bar_text(r["bar"]));
  } else if (verb == "dir rm") {
    auto r = api.del(dir_path(resolve_dir(api, o.a)));
    print.record("deleted", r, "deleted " + std::to_string(r["deleted"].get<std::uint64_t>()));
  } else if (verb == "dir trash" || verb == "dir restore") {
    auto d = api.post(dir_path(resolve_dir(api, o.a)) + (verb == "dir trash" ? "/trash" : "/restore"));
    print.record("directory", d, dir_line(d));
  } else if (verb == "dir matrix") {
    json allow = json::array();
    json deny = json::array();
    for (const auto& s : o.allow) {
      auto [role, right] = parse_cell(s);
      allow.push_back(json{{"role", role_name(role)}, {"right", right_name(right)}});
    }
    for (const auto& s : o.deny) {
      auto [role, right] = parse_cell(s);
      deny.push_back(json{{"role", role_name(role)}, {"right", right_name(right)}});
    }
    auto d = api.post(dir_path(resolve_dir(api, o.a)) + "/matrix", json{{"allow", allow}, {"deny", deny}});
    print.record("matrix", json{{"directory", d["id"]}, {"matrix", d["matrix"]}}, matrix_table(d["matrix"]));
  } else if (verb == "dir grant") {
    if (o.user.empty() == o.group.empty()) throw UsageFailure("give exactly one of --user or --group");
    auto id = resolve_dir(api, o.a);
    const char* action = o.revoke ? "revoke" : "grant";
    json r;
    if (!o.user.empty()) {
      r = api.post(dir_path(id) + "/grants/users", json{{"user", o.user}, {"action", action}});
    } else {
      r = api.post(dir_path(id) + "/grants/groups", json{{"group", resolve_dir(api, o.group)}, {"action", action}});
    }
    print.record("grant", r, std::string(action) + " ok");
  } else if (verb == "dir visibility") {
    std::string v = o.b == "private" || o.b == "Private" ? "Private" : "Public";
    auto d = api.post(dir_path(resolve_dir(api, o.a)) + "/visibility", json{{"visibility", v}});
    print.record("directory", d, dir_line(d) + "\t" + d["visibility"].get<std::string>());
  } else if (verb == "group join") {
    auto r = api.post(dir_path(resolve_dir(api, o.a)) + "/join");
    print.record("join", r, r["outcome"].get<std::string>());
  } else if (verb == "group pending") {
    for (const auto& p : api.get(dir_path(resolve_dir(api, o.a)) + "/applications")["applications"]) {
      print.record("application", p,
                   std::to_string(p["user"].get<std::uint64_t>()) + "\t" + p["username"].get<std::string>());
    }
  } else if (verb == "group permit" || verb == "group refuse") {
    auto r = api.post(dir_path(resolve_dir(api, o.a)) + "/applications/" + encode_segment(o.b),
                      json{{"decision", verb == "group permit" ? "permit" : "refuse"}});
    print.record("review", r, r["decision"].get<std::string>() + " ok");
  } else if (verb == "group kick") {
    auto r = api.del(dir_path(resolve_dir(api, o.a)) + "/members/" + encode_segment(o.b));
    print.record("kick", r, "removed " + std::to_string(r["removed"].get<std::uint64_t>()));
  } else if (verb == "group blacklist") {
    auto r = api.post(dir_path(resolve_dir(api, o.a)) + "/blacklist/" + encode_segment(o.b),
                      json{{"action", o.remove ? "remove" : "add"}});
    print.record("blacklist", r, std::string(o.remove ? "unblacklisted " : "blacklisted ") + o.b);
  } else if (verb == "article publish") {
    json atts = json::array();
    for (const auto& f : o.attach) {
      atts.push_back(json{{"filename", fs::path(f).filename().string()}, {"content_base64", base64_encode(read_file(f))}});
    }
    std::string body = o.body_file.empty() ? o.body : read_file(o.body_file);
    auto a = api.post(dir_path(resolve_dir(api, o.a)) + "/articles",
                      json{{"title", o.title}, {"abstract", o.abstract}, {"body", body}, {"attachments", atts}});
    print.record("article", a, a["url"].get<std::string>() + "\t" + a["title"].get<std::string>());
  } else if (verb == "article ls") {
    for (const auto& a : api.get(dir_path(resolve_dir(api, o.a)) + "/articles")["articles"]) {
      print.record("article", a, a["url"].get<std::string>() + "\t" + a["title"].get<std::string>());
    }
  } else if (verb == "article get") {
    if (!all_digits(o.a)) throw UsageFailure("article id must be numeric");
    if (!o.attachment.empty()) {
      std::string path = "/api/a/" + o.a + "/attachments/" + encode_segment(o.attachment);
      if (o.out_file.empty()) {
        api.download(path, {}, out);
      } else {
        std::ofstream f(o.out_file, std::ios::binary);
        api.download(path, {}, f);
      }
    } else {
      auto a = api.get("/api/a/" + o.a);
      std::string text = a["title"].get<std::string>() + "\n" + a["abstract"].get<std::string>() + "\n\n" +
                         a["body"].get<std::string>();
      for (const auto& att : a["attachments"]) {
        text += "\n[" + att["filename"].get<std::string>() + ", " + std::to_string(att["size"].get<std::uint64_t>()) +
                " bytes]";
      }
      print.record("article", a, text);
    }
  } else if (verb == "search") {
    auto r = api.get("/api/search", {{"q", o.a}, {"mode", o.mode}});
    for (const auto& h : r["hits"]) {
      std::string line = h.contains("article_url")
                             ? h["article_url"].get<std::string>() + "\t" + h.value("title", "") + "\t" +
                                   h["bar_text"].get<std::string>()
                             : h["bar_text"].get<std::string>();
      print.record("hit", h, line);
    }
  } else if (verb == "mount bind") {
    auto b = api.post(dir_path(resolve_dir(api, o.a)) + "/mounts", json{{"agent_id", o.agent_id}, {"share", o.share}});
    print.record("binding", b, std::to_string(b["id"].get<std::uint64_t>()) + "\t" + b["label"].get<std::string>());
  } else if (verb == "mount ls") {
    auto r = api.get(dir_path(resolve_dir(api, o.a)) + "/mounts/entries", {{"path", o.path}});
    for (const auto& e : r["entries"]) {
      std::string line = e["label"].get<std::string>() + "\t" + e["name"].get<std::string>() + "\t" +
                         e["kind"].get<std::string>() + "\t" + std::to_string(e["size"].get<std::uint64_t>());
      if (e["availability"] != "Live") line += "\t[unavailable]";
      print.record("entry", e, line);
    }
  } else if (verb == "mount fetch") {
    if (!all_digits(o.a)) throw UsageFailure("binding id must be numeric");
    std::string path = "/api/mounts/" + o.a + "/file";
    if (o.out_file.empty()) {
      api.download(path, {{"path", o.b}}, out);
    } else {
      const fs::path tmp = o.out_file + ".part";
      {
        std::ofstream f(tmp, std::ios::binary);
        try {
          api.download(path, {{"path", o.b}}, f);
        } catch (...) {
          f.close();
          fs::remove(tmp);
          throw;
        }
      }
      fs::rename(tmp, o.out_file);
    }
  } else if (verb == "mount unbind") {
    if (!all_digits(o.a)) throw UsageFailure("binding id must be numeric");
    auto r = api.del("/api/mounts/" + o.a);
    print.record("deleted", r, "unbound " + o.a);
  } else if (verb == "agent run") {
    if (o.shares.size() != o.labels.size()) throw UsageFailure("each --share needs a --label");
    if (profile.token.empty()) throw UsageFailure("no session token; log in first or pass --token");
    auto colon = o.relay.rfind(':');
    if (colon == std::string::npos || !all_digits(o.relay.substr(colon + 1))) {
      throw UsageFailure("--relay must be host:port");
    }
    std::string host = o.relay.substr(0, colon);
    auto port = static_cast<std::uint16_t>(std::stoul(o.relay.substr(colon + 1)));
    relay::AgentConfig cfg;
    cfg.agent_id = o.agent_id;
    cfg.token = profile.token;
    cfg.heartbeat_interval = std::chrono::milliseconds{o.heartbeat_ms};
    for (std::size_t i = 0; i < o.shares.size(); ++i) cfg.shares.emplace(o.labels[i], o.shares[i]);
    relay::Agent agent(cfg);
    err << "agent " << o.agent_id << " dialing " << o.relay << '\n';
    try {
      agent.run([&] { return relay::tcp_connect(host, port); }, std::chrono::seconds{30});
    } catch (const Error& e) {
      throw ApiFailure(401, std::string(errc_name(e.code())), e.detail());
    }
  } else {
    throw UsageFailure("unknown command");
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageFailure& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConnectionFailure& e) {
    err << "connection error: " << e.what() << '\n';
    return kConnectionError;
  } catch (const ApiFailure& e) {
    err << "error: " << e.code;
    if (e.status) err << " (HTTP " << e.status << ")";
    if (*e.what()) err << ": " << e.what();
    err << '\n';
    return kApiError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kApiError;
  }
}

}  // namespace dtree::cli
