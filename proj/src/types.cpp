#include "contrabias/types.hpp"

#include <algorithm>
#include <cctype>

namespace contrabias {
namespace {

std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '-' || c == ' ' || c == '_') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

}  // namespace

std::string_view to_string(Category category) {
  switch (category) {
    case Category::kCaste: return "caste";
    case Category::kReligion: return "religion";
    case Category::kGender: return "gender";
    case Category::kDisability: return "disability";
    case Category::kSocioeconomic: return "socioeconomic";
  }
  return "unknown";
}

std::string_view display_name(Category category) {
  switch (category) {
    case Category::kCaste: return "Caste";
    case Category::kReligion: return "Religion";
    case Category::kGender: return "Gender";
    case Category::kDisability: return "Disability";
    case Category::kSocioeconomic: return "Socioeconomic";
  }
  return "Unknown";
}

std::string_view to_string(Label label) {
  return label == Label::kStereotype ? "stereotype" : "anti_stereotype";
}

std::optional<Category> parse_category(std::string_view text) {
  const std::string key = normalize(text);
  if (key == "caste") return Category::kCaste;
  if (key == "religion") return Category::kReligion;
  if (key == "gender") return Category::kGender;
  if (key == "disability") return Category::kDisability;
  if (key == "socioeconomic" || key == "socioeconomicstatus" || key == "ses")
    return Category::kSocioeconomic;
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view text) {
  const std::string key = normalize(text);
  if (key == "stereotype" || key == "s") return Label::kStereotype;
  if (key == "antistereotype" || key == "a") return Label::kAntiStereotype;
  return std::nullopt;
}

}  // namespace contrabias
