#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace style_audit {

/// One of the ten text variants tracked per group: the human-written
/// original plus nine generated writing styles. The enumerator order is the
/// canonical order used for every rank vector and report column.
enum class StyleId : unsigned char {
  Original = 0,
  Style0,
  Style1,
  Style2,
  Style3,
  Style4,
  Style5,
  Style6,
  Style7,
  Style8,
};

inline constexpr std::size_t kNumStyles = 10;
inline constexpr std::size_t kNumGeneratedStyles = 9;

inline constexpr std::array<StyleId, kNumStyles> kAllStyles = {
    StyleId::Original, StyleId::Style0, StyleId::Style1, StyleId::Style2,
    StyleId::Style3,   StyleId::Style4, StyleId::Style5, StyleId::Style6,
    StyleId::Style7,   StyleId::Style8,
};

inline constexpr std::array<StyleId, kNumGeneratedStyles> kGeneratedStyles = {
    StyleId::Style0, StyleId::Style1, StyleId::Style2,
    StyleId::Style3, StyleId::Style4, StyleId::Style5,
    StyleId::Style6, StyleId::Style7, StyleId::Style8,
};

inline constexpr std::size_t index_of(StyleId s) noexcept {
  return static_cast<std::size_t>(s);
}

inline constexpr StyleId style_at(std::size_t i) noexcept {
  return static_cast<StyleId>(i);
}

inline constexpr std::array<std::string_view, kNumStyles> kStyleTags = {
    "original", "style_0", "style_1", "style_2", "style_3",
    "style_4",  "style_5", "style_6", "style_7", "style_8",
};

inline constexpr std::string_view to_string(StyleId s) noexcept {
  return kStyleTags[index_of(s)];
}

inline constexpr std::optional<StyleId> parse_style(std::string_view tag) noexcept {
  for (std::size_t i = 0; i < kNumStyles; ++i) {
    if (kStyleTags[i] == tag) return style_at(i);
  }
  return std::nullopt;
}

}  // namespace style_audit
