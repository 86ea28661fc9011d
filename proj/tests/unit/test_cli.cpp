#include <doctest.h>

#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <sys/stat.h>

#include "dtree/cli.hpp"
#include "http_rig.hpp"

using namespace dtree;
using namespace dtree::testing;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI against a server with a private profile file.
struct CliHarness {
  const ServerRig& rig;
  TempDir home;

  [[nodiscard]] std::string profile() const { return (home / "profile.json").string(); }

  CliResult operator()(std::vector<std::string> args) const {
    std::vector<std::string> full{"--config", profile(), "--server", rig.url()};
    full.insert(full.end(), args.begin(), args.end());
    std::ostringstream out;
    std::ostringstream err;
    CliResult r;
    r.code = cli::run(full, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
  }
};

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("verb table covers every endpoint exactly once per variant") {
    std::set<Endpoint> covered;
    std::set<std::pair<Endpoint, std::string>> keys;
    for (const auto& row : cli::verb_table()) {
      CAPTURE(row.verb);
      CHECK(keys.insert({row.endpoint, row.variant}).second);
      covered.insert(row.endpoint);
      CHECK(std::find(api_endpoints().begin(), api_endpoints().end(), row.endpoint) != api_endpoints().end());
    }
    CHECK(covered == std::set<Endpoint>(api_endpoints().begin(), api_endpoints().end()));
    // Verbs sharing an endpoint are told apart by variant.
    std::map<Endpoint, std::set<std::string>> verbs_per_endpoint;
    for (const auto& row : cli::verb_table()) verbs_per_endpoint[row.endpoint].insert(row.verb);
    for (const auto& [ep, vs] : verbs_per_endpoint) {
      if (vs.size() < 2) continue;
      for (const auto& row : cli::verb_table()) {
        if (row.endpoint == ep) CHECK_FALSE(row.variant.empty());
      }
    }
    auto all = cli::verbs();
    CHECK(std::find(all.begin(), all.end(), "agent run") != all.end());
  }

  TEST_CASE("each verb issues only its own requests, and all endpoints get exercised") {
    ServerRig rig;
    std::mutex mu;
    std::vector<std::pair<std::string, std::string>> seen;
    rig.api->set_request_observer([&](const std::string& m, const std::string& p) {
      std::lock_guard lock(mu);
      seen.emplace_back(m, p);
    });
    rig.start();
    CliHarness cli{rig};
    CliHarness other{rig};

    std::set<Endpoint> exercised;
    auto expect = [&](const std::string& verb, CliHarness& who, std::vector<std::string> args, int code = 0) {
      {
        std::lock_guard lock(mu);
        seen.clear();
      }
      auto r = who(args);
      CAPTURE(verb);
      CAPTURE(r.err);
      CHECK(r.code == code);
      // The server logger runs after the response is sent.
      std::this_thread::sleep_for(std::chrono::milliseconds{20});
      std::lock_guard lock(mu);
      CHECK_FALSE(seen.empty());
      for (const auto& [m, p] : seen) {
        bool ok = false;
        for (const auto& row : cli::verb_table()) {
          if (row.verb == verb && endpoint_matches(row.endpoint, m, p)) {
            ok = true;
            exercised.insert(row.endpoint);
          }
        }
        CAPTURE(m + " " + p);
        CHECK(ok);
      }
    };

    expect("register", cli, {"register", "teacher", kPassword});
    expect("register", other, {"register", "student", kPassword});
    expect("login", cli, {"login", "teacher", kPassword});
    expect("login", other, {"login", "student", kPassword});
    expect("dir create", cli, {"dir", "create", "1", "Course"});
    expect("dir ls", cli, {"dir", "ls"});
    expect("dir ls", cli, {"dir", "ls", "2"});
    expect("dir ls", cli, {"dir", "ls", "2", "--brief"});
    expect("dir bar", cli, {"dir", "bar", "2"});
    expect("dir matrix", cli, {"dir", "matrix", "2", "--allow", "AnyUser:Publish"});
    expect("dir grant", cli, {"dir", "grant", "2", "--user", "student"});
    expect("dir grant", cli, {"dir", "grant", "2", "--group", "2"});
    expect("dir visibility", cli, {"dir", "visibility", "2", "private"});
    expect("group join", other, {"group", "join", "2"});
    expect("group pending", cli, {"group", "pending", "2"});
    expect("group refuse", cli, {"group", "refuse", "2", "student"});
    expect("group join", other, {"group", "join", "2"});
    expect("group permit", cli, {"group", "permit", "2", "student"});
    expect("group kick", cli, {"group", "kick", "2", "student"});
    expect("group blacklist", cli, {"group", "blacklist", "2", "student"});
    expect("group blacklist", cli, {"group", "blacklist", "2", "student", "--remove"});
    TempDir files;
    write_file(files / "notes.txt", "attached bytes");
    expect("article publish", cli,
           {"article", "publish", "2", "--title", "Week 1", "--abstract", "intro", "--body", "b", "--attach",
            (files / "notes.txt").string()});
    expect("article ls", other, {"article", "ls", "2"});
    expect("article get", other, {"article", "get", "1"});
    expect("article get", other, {"article", "get", "1", "--attachment", "notes.txt"});
    expect("search", other, {"search", "cour"});
    expect("mount bind", cli, {"mount", "bind", "2", "--agent", "lap", "--share", "docs"});
    expect("mount ls", cli, {"mount", "ls", "2"});
    expect("mount fetch", cli, {"mount", "fetch", "1", "x.txt"}, cli::kApiError);
    expect("mount unbind", cli, {"mount", "unbind", "1"});
    expect("dir create", cli, {"dir", "create", "2", "old"});
    expect("dir trash", cli, {"dir", "trash", "3"});
    expect("dir restore", cli, {"dir", "restore", "3"});
    expect("dir rm", cli, {"dir", "rm", "3"});

    CHECK(exercised == std::set<Endpoint>(api_endpoints().begin(), api_endpoints().end()));
  }

  TEST_CASE("fresh server shows only the root") {
    ServerRig rig(false);
    rig.start();
    CliHarness cli{rig};
    CHECK(cli({"register", "alice", kPassword}).code == 0);
    CHECK(cli({"login", "alice", kPassword}).code == 0);
    auto r = cli({"dir", "ls"});
    CHECK(r.code == 0);
    CHECK(r.out == "ALL\n");
  }

  TEST_CASE("login writes a private profile") {
    ServerRig rig(false);
    rig.start();
    CliHarness cli{rig};
    cli({"register", "alice", kPassword});
    REQUIRE(cli({"login", "alice", kPassword}).code == 0);
    struct stat st {};
    REQUIRE(::stat(cli.profile().c_str(), &st) == 0);
    CHECK((st.st_mode & 0777) == 0600);
    std::ifstream in(cli.profile());
    auto j = nlohmann::json::parse(in);
    CHECK(rig.w.core.authenticate(j["token"].get<std::string>()).has_value());
    CHECK(j["server"] == rig.url());
  }

  TEST_CASE("exit codes") {
    ServerRig rig(false);
    rig.start();
    CliHarness cli{rig};
    CHECK(cli({}).code == cli::kUsageError);
    CHECK(cli({"frobnicate"}).code == cli::kUsageError);
    CHECK(cli({"dir", "create", "1"}).code == cli::kUsageError);
    CHECK(cli({"search", "x", "--mode", "NOPE"}).code == cli::kUsageError);
    CHECK(cli({"dir", "ls", "nowhere/x"}).code == cli::kUsageError);
    CHECK(cli({"--help"}).code == cli::kOk);
    // Not logged in: the server refuses.
    auto r = cli({"dir", "ls"});
    CHECK(r.code == cli::kApiError);
    CHECK(r.err.find("Unauthenticated") != std::string::npos);
    cli({"register", "alice", kPassword});
    CHECK(cli({"login", "alice", "wrong-password"}).code == cli::kApiError);
    cli({"login", "alice", kPassword});
    CHECK(cli({"dir", "rm", "1"}).code == cli::kApiError);
    CHECK(cli({"dir", "ls", "ALL/missing"}).code == cli::kApiError);

    std::ostringstream out;
    std::ostringstream err;
    // Port 1 on loopback refuses connections.
    CHECK(cli::run({"--config", cli.profile(), "--server", "http://127.0.0.1:1", "dir", "ls"}, out, err) ==
          cli::kConnectionError);
  }

  TEST_CASE("path references resolve case-insensitively") {
    ServerRig rig(false);
    rig.start();
    CliHarness cli{rig};
    cli({"register", "alice", kPassword});
    cli({"login", "alice", kPassword});
    REQUIRE(cli({"dir", "create", "ALL", "Operating System"}).code == 0);
    REQUIRE(cli({"dir", "create", "all/operating system", "Lab"}).code == 0);
    auto r = cli({"dir", "bar", "ALL/Operating System/lab"});
    CHECK(r.code == 0);
    CHECK(r.out == "ALL / Operating System / Lab\n");
  }

  TEST_CASE("json-lines output") {
    ServerRig rig(false);
    rig.start();
    CliHarness cli{rig};
    cli({"register", "alice", kPassword});
    cli({"login", "alice", kPassword});
    cli({"dir", "create", "1", "A"});
    cli({"dir", "create", "1", "B"});
    auto r = cli({"--format", "json-lines", "dir", "ls"});
    REQUIRE(r.code == 0);
    auto ls = lines(r.out);
    REQUIRE(ls.size() == 3);
    std::vector<std::string> types;
    for (const auto& l : ls) {
      auto j = nlohmann::json::parse(l);
      types.push_back(j["type"]);
    }
    CHECK(types == std::vector<std::string>{"directory", "child", "child"});
    CHECK(nlohmann::json::parse(ls[1])["name"] == "A");
    auto table = cli({"dir", "ls"});
    CHECK(lines(table.out) == std::vector<std::string>{"ALL", "  2\tA", "  3\tB"});
  }

  TEST_CASE("mount fetch writes the file only when complete") {
    ServerRig rig;
    rig.start();
    CliHarness cli{rig};
    cli({"register", "alice", kPassword});
    cli({"login", "alice", kPassword});
    cli({"dir", "create", "1", "M"});
    REQUIRE(cli({"mount", "bind", "2", "--agent", "lap", "--share", "docs"}).code == 0);
    TempDir share;
    std::string big(250000, 'z');
    write_file(share / "f.bin", big);
    std::ifstream in(cli.profile());
    auto token = nlohmann::json::parse(in)["token"].get<std::string>();

    relay::AgentConfig cfg;
    cfg.agent_id = "lap";
    cfg.token = token;
    cfg.shares = {{"docs", share.path()}};
    cfg.heartbeat_interval = std::chrono::milliseconds{20};
    relay::AgentFaults faults;
    faults.freeze_after_chunks = 5;
    {
      relay::Agent frozen(cfg, faults);
      frozen.attach(relay::tcp_connect("127.0.0.1", rig.relay_port));
      TempDir outdir;
      auto r = cli({"mount", "fetch", "1", "f.bin", "--out", (outdir / "f.bin").string()});
      CHECK(r.code == cli::kApiError);
      CHECK_FALSE(std::filesystem::exists(outdir / "f.bin"));
      CHECK_FALSE(std::filesystem::exists(outdir / "f.bin.part"));
      frozen.stop();
    }
    relay::Agent agent(cfg);
    agent.attach(relay::tcp_connect("127.0.0.1", rig.relay_port));
    TempDir outdir;
    auto r = cli({"mount", "fetch", "1", "f.bin", "--out", (outdir / "f.bin").string()});
    CHECK(r.code == 0);
    std::ifstream f(outdir / "f.bin", std::ios::binary);
    std::string got{std::istreambuf_iterator<char>(f), {}};
    CHECK(got == big);
    auto ls = cli({"mount", "ls", "2"});
    CHECK(ls.out == "alice:docs\tf.bin\tfile\t250000\n");
    agent.stop();
  }

  TEST_CASE("agent run gives up on a bad token") {
    ServerRig rig;
    rig.start();
    CliHarness cli{rig};
    TempDir share;
    auto r = cli({"--token", "bogus", "agent", "run", "--relay", "127.0.0.1:" + std::to_string(rig.relay_port),
                  "--agent-id", "lap", "--share", share.path().string(), "--label", "docs"});
    CHECK(r.code == cli::kApiError);
    CHECK(r.err.find("AuthFailed") != std::string::npos);
    CHECK(cli({"agent", "run", "--relay", "nope", "--agent-id", "x", "--share", "a", "--label", "b", "--token", "t"})
              .code == cli::kUsageError);
  }
}
