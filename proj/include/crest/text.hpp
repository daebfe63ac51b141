#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace crest {

using Tokens = std::vector<std::string>;

/// Deterministic tokenizer shared by every scorer.
///
/// NFC-normalizes, lowercases, and splits on non-alphanumeric code points.
/// A '.' between two digits stays inside the token so version strings such
/// as "v2.1.3" survive intact. Invalid UTF-8 bytes become U+FFFD and act as
/// separators.
inline Tokens preprocess(std::string_view text) {
  Tokens out;
  if (text.empty()) return out;

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (U_SUCCESS(status)) s = nfc->normalize(s, status);
  s.toLower(icu::Locale::getRoot());
  if (U_SUCCESS(status)) s = nfc->normalize(s, status);

  icu::UnicodeString current;
  bool last_digit = false;
  auto flush = [&] {
    if (!current.isEmpty()) {
      std::string utf8;
      current.toUTF8String(utf8);
      out.push_back(std::move(utf8));
      current.remove();
    }
    last_digit = false;
  };

  const int32_t len = s.length();
  int32_t i = 0;
  while (i < len) {
    const UChar32 c = s.char32At(i);
    const int32_t next = s.moveIndex32(i, 1);
    if (u_isalnum(c)) {
      current.append(c);
      last_digit = u_isdigit(c);
    } else if (c == u'.' && last_digit && next < len && u_isdigit(s.char32At(next))) {
      current.append(c);
      last_digit = false;
    } else {
      flush();
    }
    i = next;
  }
  flush();
  return out;
}

/// Trims ASCII whitespace from both ends.
inline std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::string join(const Tokens& tokens, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

}  // namespace crest
