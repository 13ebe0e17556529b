#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace style_audit {

// Shared tokenizer for BM25 and every n-gram metric:
//   * split on Unicode whitespace,
//   * lowercase (ASCII and Latin-1),
//   * strip leading/trailing punctuation from each token,
//   * emit each emoji cluster as its own token.
// Interior punctuation ("don't", "e-mail") is kept.

namespace detail {

struct CodePoint {
  char32_t value;
  std::size_t offset;  // byte offset in the source
  std::size_t length;  // encoded byte length
};

// Each byte of a malformed sequence decodes as U+FFFD.
inline std::vector<CodePoint> decode_utf8(std::string_view s) {
  std::vector<CodePoint> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    char32_t cp = 0xFFFD;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 >> 5) == 0x6) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 >> 4) == 0xE) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 >> 3) == 0x1E) {
      len = 4;
      cp = b0 & 0x07;
    } else {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    bool ok = i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk >> 6) != 0x2) {
        ok = false;
      } else {
        cp = (cp << 6) | (bk & 0x3F);
      }
    }
    if (!ok) {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline constexpr bool is_unicode_space(char32_t c) noexcept {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000 ||
         c == 0xFEFF;
}

inline constexpr bool is_punctuation(char32_t c) noexcept {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  return c == 0xA1 || c == 0xA7 || c == 0xAB || c == 0xB6 || c == 0xB7 ||
         c == 0xBB || c == 0xBF || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x205E) || (c >= 0x3001 && c <= 0x3003) ||
         (c >= 0x3008 && c <= 0x3011) || c == 0xFF01 || c == 0xFF0C ||
         c == 0xFF0E || c == 0xFF1A || c == 0xFF1B || c == 0xFF1F;
}

inline constexpr bool is_emoji(char32_t c) noexcept {
  return (c >= 0x1F000 && c <= 0x1FAFF) || (c >= 0x2600 && c <= 0x27BF) ||
         (c >= 0x2B00 && c <= 0x2BFF) || (c >= 0x2190 && c <= 0x21FF) ||
         c == 0x203C || c == 0x2049 || c == 0x2122 || c == 0x2139 ||
         c == 0x231A || c == 0x231B || c == 0x2328 || c == 0x23CF ||
         (c >= 0x23E9 && c <= 0x23FA) || c == 0x24C2 || c == 0x3030 ||
         c == 0x303D || c == 0x3297 || c == 0x3299;
}

// Code points that extend the preceding emoji rather than starting a token.
inline constexpr bool is_emoji_modifier(char32_t c) noexcept {
  return c == 0xFE0E || c == 0xFE0F || c == 0x20E3 ||
         (c >= 0x1F3FB && c <= 0x1F3FF) || (c >= 0xE0020 && c <= 0xE007F);
}

inline constexpr bool is_regional_indicator(char32_t c) noexcept {
  return c >= 0x1F1E6 && c <= 0x1F1FF;
}

inline constexpr char32_t to_lower(char32_t c) noexcept {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  return c;
}

inline void flush_word(std::vector<CodePoint>::const_iterator first,
                       std::vector<CodePoint>::const_iterator last,
                       std::vector<std::string>& out) {
  while (first != last && is_punctuation(first->value)) ++first;
  while (last != first && is_punctuation((last - 1)->value)) --last;
  if (first == last) return;
  std::string token;
  for (auto it = first; it != last; ++it) append_utf8(token, to_lower(it->value));
  out.push_back(std::move(token));
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text) {
  using namespace detail;
  const auto cps = decode_utf8(text);
  std::vector<std::string> out;
  auto word_begin = cps.cend();

  auto end_word = [&](std::vector<CodePoint>::const_iterator at) {
    if (word_begin != cps.cend()) {
      flush_word(word_begin, at, out);
      word_begin = cps.cend();
    }
  };

  for (auto it = cps.cbegin(); it != cps.cend();) {
    const char32_t c = it->value;
    if (is_unicode_space(c)) {
      end_word(it);
      ++it;
      continue;
    }
    if (is_emoji(c)) {
      end_word(it);
      const auto start = it;
      const bool regional = is_regional_indicator(c);
      ++it;
      if (regional && it != cps.cend() && is_regional_indicator(it->value)) ++it;
      for (;;) {
        if (it == cps.cend()) break;
        if (is_emoji_modifier(it->value)) {
          ++it;
        } else if (it->value == 0x200D && it + 1 != cps.cend() &&
                   is_emoji((it + 1)->value)) {
          it += 2;
        } else {
          break;
        }
      }
      const auto first_byte = start->offset;
      const auto last_byte = (it - 1)->offset + (it - 1)->length;
      out.emplace_back(text.substr(first_byte, last_byte - first_byte));
      continue;
    }
    if (word_begin == cps.cend()) word_begin = it;
    ++it;
  }
  end_word(cps.cend());
  return out;
}

}  // namespace style_audit
