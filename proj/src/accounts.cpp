#include "dtree/accounts.hpp"

#include <sodium.h>

#include <algorithm>

#include "dtree/error.hpp"
#include "dtree/tree_store.hpp"

namespace dtree {

namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

}  // namespace

Argon2Hasher::Argon2Hasher(Strength strength) {
  ensure_sodium();
  if (strength == Strength::Interactive) {
    ops_ = crypto_pwhash_OPSLIMIT_INTERACTIVE;
    mem_ = crypto_pwhash_MEMLIMIT_INTERACTIVE;
  } else {
    ops_ = crypto_pwhash_OPSLIMIT_MIN;
    mem_ = crypto_pwhash_MEMLIMIT_MIN;
  }
}

std::string Argon2Hasher::hash(std::string_view password) const {
  std::string out(crypto_pwhash_STRBYTES, '\0');
  if (crypto_pwhash_str_alg(out.data(), password.data(), password.size(), ops_, mem_,
                            crypto_pwhash_ALG_ARGON2ID13) != 0) {
    throw std::runtime_error("password hashing ran out of memory");
  }
  out.resize(std::char_traits<char>::length(out.c_str()));
  return out;
}

bool Argon2Hasher::verify(std::string_view stored, std::string_view password) const {
  if (stored.empty()) return false;
  std::string s(stored);
  return crypto_pwhash_str_verify(s.c_str(), password.data(), password.size()) == 0;
}

void validate_username(std::string_view username) {
  if (username.empty() || username.size() > 64) fail(Errc::InvalidArgument, "username must be 1-64 characters");
  auto ok = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '.' ||
           c == '-';
  };
  if (!std::all_of(username.begin(), username.end(), ok)) {
    fail(Errc::InvalidArgument, "username may only contain letters, digits, '_', '.', '-'");
  }
  // All-digit names would be ambiguous with user ids in URLs.
  if (std::all_of(username.begin(), username.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    fail(Errc::InvalidArgument, "username must contain a non-digit");
  }
}

AccountStore::AccountStore(Timestamp now) { add(kSystemUsername, {}, now); }

const UserAccount& AccountStore::add(std::string_view username, std::string password_hash, Timestamp now) {
  std::string key = fold_case(username);
  if (by_name_.contains(key)) fail(Errc::UsernameTaken, std::string(username));
  UserAccount acct{UserId{next_id_++}, std::string(username), std::move(password_hash), now};
  by_name_.emplace(std::move(key), acct.id);
  return accounts_.emplace(acct.id, std::move(acct)).first->second;
}

const UserAccount* AccountStore::find(UserId id) const {
  auto it = accounts_.find(id);
  return it == accounts_.end() ? nullptr : &it->second;
}

const UserAccount* AccountStore::find_by_name(std::string_view username) const {
  auto it = by_name_.find(fold_case(username));
  return it == by_name_.end() ? nullptr : find(it->second);
}

AccountStore AccountStore::rebuild(std::vector<UserAccount> accounts, std::uint64_t next_id) {
  AccountStore s;
  s.next_id_ = next_id;
  for (auto& a : accounts) {
    if (!a.id.valid() || a.id.value() >= next_id) fail(Errc::CorruptSnapshot, "account id out of range");
    if (!s.by_name_.emplace(fold_case(a.username), a.id).second) fail(Errc::CorruptSnapshot, "duplicate username");
    const UserId id = a.id;
    if (!s.accounts_.emplace(id, std::move(a)).second) fail(Errc::CorruptSnapshot, "duplicate account id");
  }
  const auto* sys = s.find(UserId{1});
  if (sys == nullptr || sys->username != kSystemUsername) fail(Errc::CorruptSnapshot, "missing system account");
  return s;
}

RandomSource system_random() {
  ensure_sodium();
  return [](std::span<std::uint8_t> buf) { randombytes_buf(buf.data(), buf.size()); };
}

SessionStore::SessionStore(const Clock& clock, std::chrono::microseconds ttl, RandomSource random)
    : clock_(clock), ttl_(ttl), random_(std::move(random)) {}

std::string SessionStore::issue(UserId user) {
  std::array<std::uint8_t, kTokenBytes> raw{};
  random_(raw);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string token;
  token.reserve(raw.size() * 2);
  for (auto b : raw) {
    token.push_back(kHex[b >> 4]);
    token.push_back(kHex[b & 0xF]);
  }
  std::lock_guard lock(mu_);
  sessions_[token] = Session{user, clock_.now() + ttl_};
  return token;
}

std::optional<UserId> SessionStore::resolve(std::string_view token) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(std::string(token));
  if (it == sessions_.end()) return std::nullopt;
  if (clock_.now() >= it->second.expires_at) {
    sessions_.erase(it);
    return std::nullopt;
  }
  return it->second.user;
}

void SessionStore::revoke(std::string_view token) {
  std::lock_guard lock(mu_);
  sessions_.erase(std::string(token));
}

}  // namespace dtree
