#include "dtree/snapshot.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dtree/digest.hpp"
#include "dtree/error.hpp"
#include "dtree/json_codec.hpp"

namespace dtree {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_fail(const std::string& what, const fs::path& p) {
  fail(Errc::IoError, what + " " + p.string() + ": " + std::strerror(errno));
}

void fsync_path(const fs::path& p, bool directory) {
  int fd = ::open(p.c_str(), directory ? O_RDONLY | O_DIRECTORY : O_RDONLY);
  if (fd < 0) io_fail("open", p);
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) io_fail("fsync", p);
}

void write_durable(const fs::path& p, std::string_view bytes) {
  int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  if (fd < 0) io_fail("create", p);
  const char* data = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    ssize_t n = ::write(fd, data, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_fail("write", p);
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_fail("fsync", p);
  }
  ::close(fd);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) io_fail("open", p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path blob_dir(const fs::path& snapshot) {
  auto parent = snapshot.parent_path();
  return (parent.empty() ? fs::path(".") : parent) / "blobs";
}

template <typename T>
json ids(const T& set) {
  json out = json::array();
  for (const auto& id : set) out.push_back(id.value());
  return out;
}

json encode(const State& s) {
  json accounts = json::array();
  for (const auto& [id, a] : s.accounts.all()) {
    accounts.push_back(json{{"id", id.value()},
                            {"username", a.username},
                            {"password_hash", a.password_hash},
                            {"created_at", to_micros(a.created_at)}});
  }

  json dirs = json::array();
  for (const auto& [id, n] : s.tree.nodes()) {
    const auto& d = n.dir;
    json pending = json::array();
    for (const auto& p : n.group.pending()) {
      pending.push_back(json{{"user", p.user.value()}, {"applied_at", to_micros(p.applied_at)}});
    }
    dirs.push_back(json{{"id", d.id.value()},
                        {"name", d.name},
                        {"parent", d.parent.value()},
                        {"owner", d.owner.value()},
                        {"state", state_name(d.state)},
                        {"visibility", visibility_name(d.visibility)},
                        {"matrix", d.matrix.bits()},
                        {"created_at", to_micros(d.created_at)},
                        {"members", ids(n.group.members())},
                        {"pending", std::move(pending)},
                        {"blacklist", ids(n.group.blacklisted())},
                        {"granted_users", ids(n.grants.users)},
                        {"granted_groups", ids(n.grants.groups)}});
  }
  // unordered_map iteration order is not stable; the checksum needs it to be.
  std::sort(dirs.begin(), dirs.end(), [](const json& a, const json& b) { return a["id"] < b["id"]; });

  json articles = json::array();
  for (const auto& [id, a] : s.tree.articles()) {
    json atts = json::array();
    for (const auto& att : a.attachments) {
      atts.push_back(json{{"filename", att.filename}, {"sha256", att.sha256}, {"size", att.size()}});
    }
    articles.push_back(json{{"id", id.value()},
                            {"directory", a.directory.value()},
                            {"author", a.author.value()},
                            {"title", a.title},
                            {"abstract", a.abstract},
                            {"body", a.body},
                            {"published_at", to_micros(a.published_at)},
                            {"attachments", std::move(atts)}});
  }

  json bindings = json::array();
  for (const auto& [id, b] : s.bindings) bindings.push_back(binding_to_json(b));

  return json{{"accounts", std::move(accounts)},
              {"next_user_id", s.accounts.next_id()},
              {"directories", std::move(dirs)},
              {"next_directory_id", s.tree.next_directory_id()},
              {"articles", std::move(articles)},
              {"next_article_id", s.tree.next_article_id()},
              {"bindings", std::move(bindings)},
              {"next_binding_id", s.next_binding}};
}

DirState parse_state(const std::string& s) {
  if (s == "Active") return DirState::Active;
  if (s == "Trashed") return DirState::Trashed;
  fail(Errc::CorruptSnapshot, "bad directory state");
}

template <typename IdT>
std::set<IdT> id_set(const json& j) {
  std::set<IdT> out;
  for (const auto& v : j) out.insert(IdT{v.get<std::uint64_t>()});
  return out;
}

State decode(const json& p, const fs::path& blobs) {
  std::vector<UserAccount> accounts;
  for (const auto& a : p.at("accounts")) {
    accounts.push_back(UserAccount{UserId{a.at("id").get<std::uint64_t>()}, a.at("username").get<std::string>(),
                                   a.at("password_hash").get<std::string>(),
                                   from_micros(a.at("created_at").get<std::int64_t>())});
  }
  auto account_store = AccountStore::rebuild(std::move(accounts), p.at("next_user_id").get<std::uint64_t>());

  std::vector<DirectoryNode> nodes;
  for (const auto& d : p.at("directories")) {
    DirectoryNode n;
    n.dir.id = DirectoryId{d.at("id").get<std::uint64_t>()};
    n.dir.name = d.at("name").get<std::string>();
    n.dir.parent = DirectoryId{d.at("parent").get<std::uint64_t>()};
    n.dir.owner = UserId{d.at("owner").get<std::uint64_t>()};
    n.dir.state = parse_state(d.at("state").get<std::string>());
    try {
      n.dir.visibility = parse_visibility(d.at("visibility").get<std::string>());
    } catch (const Error&) {
      fail(Errc::CorruptSnapshot, "bad visibility");
    }
    n.dir.matrix = AuthMatrix::from_bits(d.at("matrix").get<std::uint32_t>());
    n.dir.created_at = from_micros(d.at("created_at").get<std::int64_t>());
    std::vector<PendingApplication> pending;
    for (const auto& a : d.at("pending")) {
      pending.push_back({UserId{a.at("user").get<std::uint64_t>()}, from_micros(a.at("applied_at").get<std::int64_t>())});
    }
    n.group = GroupState::restore(id_set<UserId>(d.at("members")), std::move(pending),
                                  id_set<UserId>(d.at("blacklist")));
    n.grants.users = id_set<UserId>(d.at("granted_users"));
    n.grants.groups = id_set<DirectoryId>(d.at("granted_groups"));
    nodes.push_back(std::move(n));
  }

  std::vector<Article> articles;
  for (const auto& a : p.at("articles")) {
    Article art;
    art.id = ArticleId{a.at("id").get<std::uint64_t>()};
    art.directory = DirectoryId{a.at("directory").get<std::uint64_t>()};
    art.author = UserId{a.at("author").get<std::uint64_t>()};
    art.title = a.at("title").get<std::string>();
    art.abstract = a.at("abstract").get<std::string>();
    art.body = a.at("body").get<std::string>();
    art.published_at = from_micros(a.at("published_at").get<std::int64_t>());
    for (const auto& att : a.at("attachments")) {
      std::string digest = att.at("sha256").get<std::string>();
      if (digest.size() != 64 || digest.find_first_not_of("0123456789abcdef") != std::string::npos) {
        fail(Errc::CorruptSnapshot, "bad blob digest");
      }
      fs::path bp = blobs / digest;
      if (!fs::exists(bp)) fail(Errc::CorruptSnapshot, "missing blob " + digest);
      std::string bytes = read_file(bp);
      if (sha256_hex(bytes) != digest || bytes.size() != att.at("size").get<std::size_t>()) {
        fail(Errc::CorruptSnapshot, "blob " + digest + " does not match its digest");
      }
      art.attachments.push_back(Attachment{att.at("filename").get<std::string>(), std::move(digest),
                                           std::make_shared<const std::string>(std::move(bytes))});
    }
    articles.push_back(std::move(art));
  }
  auto tree = TreeStore::rebuild(std::move(nodes), std::move(articles), p.at("next_directory_id").get<std::uint64_t>(),
                                 p.at("next_article_id").get<std::uint64_t>());

  std::map<BindingId, MountBinding> bindings;
  for (const auto& b : p.at("bindings")) {
    MountBinding mb{BindingId{b.at("id").get<std::uint64_t>()}, DirectoryId{b.at("directory").get<std::uint64_t>()},
                    UserId{b.at("account").get<std::uint64_t>()}, b.at("agent_id").get<std::string>(),
                    b.at("share_path").get<std::string>(), from_micros(b.at("created_at").get<std::int64_t>())};
    if (tree.find(mb.directory) == nullptr) fail(Errc::CorruptSnapshot, "binding on unknown directory");
    bindings.emplace(mb.id, std::move(mb));
  }
  for (const auto& [id, n] : tree.nodes()) {
    for (auto g : n.grants.groups) {
      if (tree.find(g) == nullptr) fail(Errc::CorruptSnapshot, "grant names unknown group");
    }
  }
  return State(std::move(account_store), std::move(tree), std::move(bindings),
               p.at("next_binding_id").get<std::uint64_t>());
}

}  // namespace

void save_state(const State& state, const fs::path& path, const SaveOptions& opts) {
  const fs::path blobs = blob_dir(path);
  std::error_code ec;
  fs::create_directories(blobs, ec);
  if (ec) fail(Errc::IoError, "create " + blobs.string() + ": " + ec.message());

  bool wrote_blob = false;
  for (const auto& [id, a] : state.tree.articles()) {
    for (const auto& att : a.attachments) {
      fs::path bp = blobs / att.sha256;
      if (fs::exists(bp)) continue;
      fs::path tmp = bp;
      tmp += ".tmp";
      write_durable(tmp, *att.content);
      fs::rename(tmp, bp);
      wrote_blob = true;
    }
  }
  if (wrote_blob) fsync_path(blobs, true);

  json payload = encode(state);
  std::string body = payload.dump();
  json doc{{"format", kSnapshotFormat},
           {"schema_version", kSnapshotSchemaVersion},
           {"checksum", sha256_hex(body)},
           {"payload", std::move(payload)}};

  fs::path tmp = path;
  tmp += ".tmp";
  write_durable(tmp, doc.dump());
  if (opts.before_rename) opts.before_rename();
  fs::rename(tmp, path, ec);
  if (ec) fail(Errc::IoError, "rename " + tmp.string() + ": " + ec.message());
  auto parent = path.parent_path();
  fsync_path(parent.empty() ? fs::path(".") : parent, true);
}

State load_state(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::IoError, "no snapshot at " + path.string());
  std::string text = read_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) fail(Errc::CorruptSnapshot, "unparseable snapshot");
  if (doc.value("format", "") != kSnapshotFormat) fail(Errc::CorruptSnapshot, "not a snapshot file");
  if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    fail(Errc::CorruptSnapshot, "missing schema version");
  }
  if (doc["schema_version"].get<int>() != kSnapshotSchemaVersion) {
    fail(Errc::SchemaVersionMismatch, "found version " + doc["schema_version"].dump());
  }
  if (!doc.contains("payload") || !doc.contains("checksum")) fail(Errc::CorruptSnapshot, "missing sections");
  if (sha256_hex(doc["payload"].dump()) != doc["checksum"].get<std::string>()) {
    fail(Errc::CorruptSnapshot, "checksum mismatch");
  }
  try {
    return decode(doc["payload"], blob_dir(path));
  } catch (const json::exception& e) {
    fail(Errc::CorruptSnapshot, e.what());
  }
}

}  // namespace dtree
