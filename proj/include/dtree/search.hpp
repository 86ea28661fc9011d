#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dtree/ids.hpp"
#include "dtree/tree_store.hpp"

namespace dtree {

enum class SearchMode { Dir, Key, MyDir, MyKey, MyAllDir };

/// "DIR", "KEY", "MY_DIR", "MY_KEY", "MY_ALL_DIR".
std::string_view mode_name(SearchMode mode);
/// Throws InvalidMode for anything else.
SearchMode parse_mode(std::string_view name);
[[nodiscard]] inline bool is_article_mode(SearchMode m) { return m == SearchMode::Key || m == SearchMode::MyKey; }

inline constexpr std::string_view kAndConnective = " and ";

/// Splits the search box input on the exact connective " and " (one space
/// each side). Sides are trimmed; an empty side is EmptyTerm, an empty input
/// EmptyQuery. Case is preserved here and folded at match time.
std::vector<std::string> parse_query(std::string_view raw);

struct Query {
  std::vector<std::string> terms;  // may be empty only for MyAllDir
  SearchMode mode = SearchMode::Dir;
  UserId requester;
};

/// Builds a Query from raw box input. A blank input is accepted only in
/// MyAllDir mode, where it means "everything I created".
Query make_query(std::string_view raw, SearchMode mode, UserId requester);

struct SearchHit {
  DirectoryId directory;
  NavigatorBar bar;
  std::optional<ArticleId> article;
  std::optional<std::string> article_url;  // set exactly for article modes
  std::optional<std::string> title;

  bool operator==(const SearchHit&) const = default;
};

std::string article_url(ArticleId id);

/// Inverted index from case-folded character trigrams to document ids.
/// Candidates are a superset of the true matches; `contains` verifies.
class TrigramIndex {
 public:
  void add(std::uint64_t doc, std::string_view text);
  void remove(std::uint64_t doc);
  void clear();

  /// Documents that may contain `folded_term`; nullopt means the term is too
  /// short to constrain the candidate set.
  [[nodiscard]] std::optional<std::vector<std::uint64_t>> candidates(std::string_view folded_term) const;
  [[nodiscard]] bool contains(std::uint64_t doc, std::string_view folded_term) const;
  [[nodiscard]] const std::unordered_map<std::uint64_t, std::string>& documents() const { return texts_; }

 private:
  std::unordered_map<std::uint32_t, std::vector<std::uint64_t>> postings_;  // sorted ids
  std::unordered_map<std::uint64_t, std::string> texts_;                    // folded
};

/// Text side of search: directory bars and article title/abstract. Knows
/// nothing about trash or permissions; the caller filters.
class SearchIndex {
 public:
  void add_directory(DirectoryId id, std::string_view bar_text);
  void remove_directory(DirectoryId id);
  void add_article(ArticleId id, std::string_view title, std::string_view abstract);
  void remove_article(ArticleId id);
  void clear();

  /// Directories whose bar text contains every term.
  [[nodiscard]] std::vector<DirectoryId> match_directories(const std::vector<std::string>& terms) const;
  /// Articles where every term occurs in the title or the abstract.
  [[nodiscard]] std::vector<ArticleId> match_articles(const std::vector<std::string>& terms) const;

  [[nodiscard]] std::size_t directory_count() const { return dirs_.documents().size(); }
  [[nodiscard]] std::size_t article_count() const { return titles_.documents().size(); }

 private:
  TrigramIndex dirs_;
  TrigramIndex titles_;
  TrigramIndex abstracts_;
};

}  // namespace dtree
