#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "contrabias/corpus.hpp"

namespace contrabias::testing {

inline std::filesystem::path source_path(const std::string& relative) {
  return std::filesystem::path(CONTRABIAS_SOURCE_DIR) / relative;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("contrabias_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ContextGroup make_group(const std::string& id, Category category,
                               const std::vector<std::string>& stereotypes,
                               const std::vector<std::string>& antis) {
  ContextGroup g;
  g.context_id = id;
  g.category = category;
  for (const auto& t : stereotypes) g.stereotypes.push_back({id, category, Label::kStereotype, t});
  for (const auto& t : antis) g.anti_stereotypes.push_back({id, category, Label::kAntiStereotype, t});
  return g;
}

// Context with n_s + n_a sentences built from random words.
inline ContextGroup random_group(std::mt19937_64& rng, const std::string& id, Category category,
                                 int n_s, int n_a) {
  static const char* kWords[] = {"alpha", "beta",  "gamma", "delta", "river", "stone", "house",
                                 "field", "cloud", "light", "north", "south", "paper", "glass",
                                 "bread", "salt",  "iron",  "wool",  "lamp",  "road"};
  auto sentence = [&] {
    std::uniform_int_distribution<int> len(2, 6), pick(0, 19);
    std::string s;
    for (int k = len(rng); k > 0; --k) s += std::string(kWords[pick(rng)]) + " ";
    return s + id;
  };
  std::vector<std::string> s, a;
  for (int i = 0; i < n_s; ++i) s.push_back(sentence());
  for (int i = 0; i < n_a; ++i) a.push_back(sentence());
  return make_group(id, category, s, a);
}

}  // namespace contrabias::testing
