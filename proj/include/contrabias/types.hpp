#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace contrabias {

enum class Category { kCaste, kReligion, kGender, kDisability, kSocioeconomic };

// Column order used by every per-category table.
inline constexpr std::array<Category, 5> kAllCategories = {
    Category::kCaste, Category::kReligion, Category::kDisability,
    Category::kGender, Category::kSocioeconomic};

enum class Label { kStereotype, kAntiStereotype };

std::string_view to_string(Category category);
std::string_view to_string(Label label);
std::string_view display_name(Category category);

// Accepts the canonical lowercase names plus a few common spellings
// ("socioeconomic status", "stereotype"/"anti-stereotype"/"S"/"A").
std::optional<Category> parse_category(std::string_view text);
std::optional<Label> parse_label(std::string_view text);

inline Label opposite(Label label) {
  return label == Label::kStereotype ? Label::kAntiStereotype
                                     : Label::kStereotype;
}

}  // namespace contrabias
