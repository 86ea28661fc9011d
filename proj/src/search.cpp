#include "dtree/search.hpp"

#include <algorithm>
#include <iterator>

#include "dtree/error.hpp"

namespace dtree {

namespace {

std::string_view trim(std::string_view s) {
  constexpr std::string_view kWs = " \t\r\n\v\f";
  auto b = s.find_first_not_of(kWs);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(kWs);
  return s.substr(b, e - b + 1);
}

std::uint32_t trigram_at(std::string_view s, std::size_t i) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[i])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[i + 1])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[i + 2]));
}

std::vector<std::uint32_t> trigrams(std::string_view s) {
  std::vector<std::uint32_t> out;
  if (s.size() < 3) return out;
  out.reserve(s.size() - 2);
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) out.push_back(trigram_at(s, i));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::uint64_t> intersect(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::uint64_t> unite(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::vector<std::uint64_t> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::uint64_t> all_docs(const TrigramIndex& idx) {
  std::vector<std::uint64_t> out;
  out.reserve(idx.documents().size());
  for (const auto& [doc, text] : idx.documents()) out.push_back(doc);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> fold_all(const std::vector<std::string>& terms) {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(fold_case(t));
  return out;
}

}  // namespace

std::string_view mode_name(SearchMode mode) {
  switch (mode) {
    case SearchMode::Dir: return "DIR";
    case SearchMode::Key: return "KEY";
    case SearchMode::MyDir: return "MY_DIR";
    case SearchMode::MyKey: return "MY_KEY";
    case SearchMode::MyAllDir: return "MY_ALL_DIR";
  }
  return {};
}

SearchMode parse_mode(std::string_view name) {
  for (auto m : {SearchMode::Dir, SearchMode::Key, SearchMode::MyDir, SearchMode::MyKey, SearchMode::MyAllDir}) {
    if (mode_name(m) == name) return m;
  }
  fail(Errc::InvalidMode, std::string(name));
}

std::vector<std::string> parse_query(std::string_view raw) {
  std::string_view rest = trim(raw);
  if (rest.empty()) fail(Errc::EmptyQuery);
  std::vector<std::string> terms;
  while (true) {
    auto pos = rest.find(kAndConnective);
    std::string_view side = trim(rest.substr(0, pos));
    if (side.empty()) fail(Errc::EmptyTerm);
    terms.emplace_back(side);
    if (pos == std::string_view::npos) break;
    rest = rest.substr(pos + kAndConnective.size());
  }
  return terms;
}

Query make_query(std::string_view raw, SearchMode mode, UserId requester) {
  Query q;
  q.mode = mode;
  q.requester = requester;
  if (mode == SearchMode::MyAllDir && trim(raw).empty()) return q;
  q.terms = parse_query(raw);
  return q;
}

std::string article_url(ArticleId id) { return "/a/" + id.str(); }

void TrigramIndex::add(std::uint64_t doc, std::string_view text) {
  remove(doc);
  std::string folded = fold_case(text);
  for (auto tg : trigrams(folded)) {
    auto& list = postings_[tg];
    list.insert(std::lower_bound(list.begin(), list.end(), doc), doc);
  }
  texts_.emplace(doc, std::move(folded));
}

void TrigramIndex::remove(std::uint64_t doc) {
  auto it = texts_.find(doc);
  if (it == texts_.end()) return;
  for (auto tg : trigrams(it->second)) {
    auto p = postings_.find(tg);
    if (p == postings_.end()) continue;
    auto& list = p->second;
    auto pos = std::lower_bound(list.begin(), list.end(), doc);
    if (pos != list.end() && *pos == doc) list.erase(pos);
    if (list.empty()) postings_.erase(p);
  }
  texts_.erase(it);
}

void TrigramIndex::clear() {
  postings_.clear();
  texts_.clear();
}

std::optional<std::vector<std::uint64_t>> TrigramIndex::candidates(std::string_view folded_term) const {
  auto grams = trigrams(folded_term);
  if (grams.empty()) return std::nullopt;
  std::vector<const std::vector<std::uint64_t>*> lists;
  for (auto tg : grams) {
    auto it = postings_.find(tg);
    if (it == postings_.end()) return std::vector<std::uint64_t>{};
    lists.push_back(&it->second);
  }
  std::sort(lists.begin(), lists.end(), [](auto* a, auto* b) { return a->size() < b->size(); });
  std::vector<std::uint64_t> out = *lists.front();
  for (std::size_t i = 1; i < lists.size() && !out.empty(); ++i) out = intersect(out, *lists[i]);
  return out;
}

bool TrigramIndex::contains(std::uint64_t doc, std::string_view folded_term) const {
  auto it = texts_.find(doc);
  return it != texts_.end() && it->second.find(folded_term) != std::string::npos;
}

void SearchIndex::add_directory(DirectoryId id, std::string_view bar_text) { dirs_.add(id.value(), bar_text); }
void SearchIndex::remove_directory(DirectoryId id) { dirs_.remove(id.value()); }

void SearchIndex::add_article(ArticleId id, std::string_view title, std::string_view abstract) {
  titles_.add(id.value(), title);
  abstracts_.add(id.value(), abstract);
}

void SearchIndex::remove_article(ArticleId id) {
  titles_.remove(id.value());
  abstracts_.remove(id.value());
}

void SearchIndex::clear() {
  dirs_.clear();
  titles_.clear();
  abstracts_.clear();
}

std::vector<DirectoryId> SearchIndex::match_directories(const std::vector<std::string>& terms) const {
  auto folded = fold_all(terms);
  std::optional<std::vector<std::uint64_t>> cand;
  for (const auto& t : folded) {
    auto c = dirs_.candidates(t);
    if (!c) continue;
    cand = cand ? intersect(*cand, *c) : std::move(*c);
  }
  std::vector<std::uint64_t> docs = cand ? std::move(*cand) : all_docs(dirs_);
  std::vector<DirectoryId> out;
  for (auto d : docs) {
    if (std::all_of(folded.begin(), folded.end(), [&](const auto& t) { return dirs_.contains(d, t); })) {
      out.emplace_back(d);
    }
  }
  return out;
}

std::vector<ArticleId> SearchIndex::match_articles(const std::vector<std::string>& terms) const {
  auto folded = fold_all(terms);
  std::optional<std::vector<std::uint64_t>> cand;
  for (const auto& t : folded) {
    auto ct = titles_.candidates(t);
    auto ca = abstracts_.candidates(t);
    if (!ct || !ca) continue;  // too short to narrow either field
    auto c = unite(*ct, *ca);
    cand = cand ? intersect(*cand, c) : std::move(c);
  }
  std::vector<std::uint64_t> docs = cand ? std::move(*cand) : all_docs(titles_);
  std::vector<ArticleId> out;
  for (auto d : docs) {
    bool ok = std::all_of(folded.begin(), folded.end(),
                          [&](const auto& t) { return titles_.contains(d, t) || abstracts_.contains(d, t); });
    if (ok) out.emplace_back(d);
  }
  return out;
}

}  // namespace dtree
