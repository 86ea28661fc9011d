#include <doctest.h>

#include <random>

#include "corpus.hpp"
#include "dtree/error.hpp"
#include "dtree/search.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dtree;
using namespace dtree::testing;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::NotFound;
}

std::vector<SearchHit> run(World& w, std::string_view raw, SearchMode mode, UserId u) {
  return w.core.execute_search(make_query(raw, mode, u));
}

constexpr SearchMode kModes[] = {SearchMode::Dir, SearchMode::Key, SearchMode::MyDir, SearchMode::MyKey,
                                 SearchMode::MyAllDir};

}  // namespace

TEST_SUITE("search") {
  TEST_CASE("parse_query splits on the exact connective") {
    CHECK(parse_query("protocol and course") == std::vector<std::string>{"protocol", "course"});
    CHECK(parse_query("operating system") == std::vector<std::string>{"operating system"});
    CHECK(parse_query("android") == std::vector<std::string>{"android"});
    CHECK(parse_query("  a and b and c ") == std::vector<std::string>{"a", "b", "c"});
    CHECK(parse_query("protocol  and course") == std::vector<std::string>{"protocol", "course"});
    CHECK(parse_query("protocol AND course") == std::vector<std::string>{"protocol AND course"});
    CHECK(parse_query("sand andes") == std::vector<std::string>{"sand andes"});
    CHECK(code_of([] { parse_query("   "); }) == Errc::EmptyQuery);
    CHECK(code_of([] { parse_query("a and  and b"); }) == Errc::EmptyTerm);
  }

  TEST_CASE("parse_query inverts joining") {
    std::mt19937_64 rng(4);
    const std::string alphabet = "abcdnAD -";
    for (int i = 0; i < 2000; ++i) {
      std::vector<std::string> terms;
      int n = 1 + static_cast<int>(rng() % 4);
      for (int k = 0; k < n; ++k) {
        std::string t;
        int len = 1 + static_cast<int>(rng() % 8);
        for (int j = 0; j < len; ++j) t += alphabet[rng() % alphabet.size()];
        // keep terms trimmed and free of the connective
        while (!t.empty() && t.front() == ' ') t.erase(0, 1);
        while (!t.empty() && t.back() == ' ') t.pop_back();
        if (t.empty() || t.find(" and ") != std::string::npos || t.starts_with("and ") || t.ends_with(" and")) {
          t = "x";
        }
        terms.push_back(t);
      }
      std::string joined;
      for (const auto& t : terms) joined += (joined.empty() ? "" : " and ") + t;
      REQUIRE(parse_query(joined) == terms);
    }
  }

  TEST_CASE("mode names") {
    CHECK(parse_mode("MY_ALL_DIR") == SearchMode::MyAllDir);
    CHECK(mode_name(SearchMode::MyKey) == "MY_KEY");
    CHECK(code_of([] { parse_mode("dir"); }) == Errc::InvalidMode);
  }

  TEST_CASE("trigram candidates are a superset of matches") {
    TrigramIndex idx;
    idx.add(1, "Operating System");
    idx.add(2, "network protocol");
    idx.add(3, "os");
    auto c = idx.candidates("system");
    REQUIRE(c.has_value());
    CHECK(std::find(c->begin(), c->end(), 1U) != c->end());
    CHECK(idx.contains(1, "rating s"));
    CHECK_FALSE(idx.candidates("os").has_value());  // too short to filter
    idx.remove(1);
    CHECK(idx.candidates("system")->empty());
  }

  TEST_CASE("empty corpus") {
    World w;
    auto u = w.user("u");
    CHECK(run(w, "anything", SearchMode::Key, u).empty());
    CHECK(code_of([&] { (void)run(w, "", SearchMode::Dir, u); }) == Errc::EmptyQuery);
  }

  TEST_CASE("Dir hits contain every term across the bar") {
    World w;
    auto t = w.user("teacher");
    auto net = w.core.create_directory(kRootId, "Network Protocol", t).id;
    auto c1 = w.core.create_directory(net, "course 2017", t).id;
    w.core.create_directory(kRootId, "course only", t);
    auto hits = run(w, "protocol and course", SearchMode::Dir, t);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].directory == c1);
    CHECK(render_bar(hits[0].bar) == "ALL / Network Protocol / course 2017");
    CHECK_FALSE(hits[0].article_url.has_value());
  }

  TEST_CASE("index follows mutations") {
    World w;
    auto t = w.user("teacher");
    auto d = w.core.create_directory(kRootId, "zebra", t).id;
    CHECK(run(w, "zebra", SearchMode::Dir, t).size() == 1);
    w.core.trash_directory(d, t);
    CHECK(run(w, "zebra", SearchMode::Dir, t).empty());
    w.core.restore_directory(d, t);
    ArticleDraft a;
    a.title = "Lecture";
    a.abstract = "quokka facts";
    auto art = w.core.publish_article(d, t, a);
    auto hits = run(w, "QUOKKA", SearchMode::Key, t);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].article_url == "/a/" + art.id.str());
    w.core.delete_directory(w.core.create_directory(kRootId, "gone", t).id, t);
    CHECK(run(w, "gone", SearchMode::Dir, t).empty());
  }

  TEST_CASE("MY modes restrict to the requester") {
    World w;
    auto a = w.user("alice");
    auto b = w.user("bob");
    w.core.create_directory(kRootId, "alice stuff", a);
    auto bd = w.core.create_directory(kRootId, "bob stuff", b).id;
    CHECK(run(w, "stuff", SearchMode::Dir, a).size() == 2);
    CHECK(run(w, "stuff", SearchMode::MyDir, a).size() == 1);
    CHECK(run(w, "", SearchMode::MyAllDir, b).size() == 1);
    CHECK(run(w, "", SearchMode::MyAllDir, b)[0].directory == bd);
    ArticleDraft d;
    d.title = "stuff";
    w.core.publish_article(bd, b, d);
    CHECK(run(w, "stuff", SearchMode::MyKey, a).empty());
    CHECK(run(w, "stuff", SearchMode::MyKey, b).size() == 1);
  }

  TEST_CASE("Key hits need Read as well as ShowDir") {
    World w;
    auto t = w.user("teacher");
    auto s = w.user("student");
    auto d = w.core.create_directory(kRootId, "d", t).id;
    ArticleDraft a;
    a.title = "secret plans";
    w.core.publish_article(d, t, a);
    CHECK(run(w, "plans", SearchMode::Key, s).size() == 1);
    auto m = default_matrix();
    m.set(Role::AnyUser, Right::Read, false);
    w.core.set_matrix(d, t, m);
    CHECK(run(w, "plans", SearchMode::Key, s).empty());
    CHECK(run(w, "plans", SearchMode::Key, t).size() == 1);
  }

  TEST_CASE("equal publish times order by id descending") {
    ManualClock frozen(from_micros(1'000'000), std::chrono::microseconds{0});
    Core core(frozen, fast_hasher());
    auto t = core.register_user("teacher", kPassword).id;
    auto d = core.create_directory(kRootId, "d", t).id;
    ArticleDraft a;
    a.title = "same";
    auto x = core.publish_article(d, t, a).id;
    auto y = core.publish_article(d, t, a).id;
    auto hits = core.execute_search(make_query("same", SearchMode::Key, t));
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].article == y);
    CHECK(hits[1].article == x);
  }

  TEST_CASE("random corpus equals the scan oracle") {
    std::mt19937_64 rng(2024);
    World w;
    auto corpus = build_corpus(w, rng, 5, 150, 300);
    std::size_t total_hits = 0;
    for (int i = 0; i < 60; ++i) {
      auto raw = random_query(rng);
      auto u = corpus.users[rng() % corpus.users.size()];
      for (auto mode : kModes) {
        auto got = run(w, raw, mode, u);
        auto terms = parse_query(raw);
        auto want = w.core.with_state([&](const State& s) { return search_oracle(s, terms, mode, u); });
        CAPTURE(raw);
        REQUIRE(got == want);
        total_hits += got.size();
        for (const auto& h : got) REQUIRE(w.core.check_right(u, h.directory, Right::ShowDir));
      }
    }
    CHECK(total_hits > 100);
  }

  TEST_CASE("deterministic") {
    std::mt19937_64 rng(8);
    World w;
    auto corpus = build_corpus(w, rng, 3, 60, 80);
    auto u = corpus.users[0];
    CHECK(run(w, "o", SearchMode::Dir, u) == run(w, "o", SearchMode::Dir, u));
    w.core.reindex_full();
    CHECK(run(w, "co and o", SearchMode::Key, u) ==
          w.core.with_state([&](const State& s) { return search_oracle(s, {"co", "o"}, SearchMode::Key, u); }));
  }
}
