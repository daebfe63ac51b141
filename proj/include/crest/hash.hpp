#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace crest {

// Stable across platforms and runs, unlike std::hash.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Incremental hasher for fingerprints of structured data. Each field is
/// length-prefixed so ("ab","c") and ("a","bc") differ.
class Fingerprint {
 public:
  Fingerprint& add(std::string_view s) {
    const std::uint64_t n = s.size();
    h_ = fnv1a64(std::string_view(reinterpret_cast<const char*>(&n), sizeof n), h_);
    h_ = fnv1a64(s, h_);
    return *this;
  }
  Fingerprint& add(std::uint64_t v) {
    h_ = fnv1a64(std::string_view(reinterpret_cast<const char*>(&v), sizeof v), h_);
    return *this;
  }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const { return to_hex(h_); }

  static std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace crest
