#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "contrabias/types.hpp"

namespace contrabias {

inline constexpr std::string_view kMaskToken = "<MASK>";

struct SentenceRecord {
  std::string context_id;
  Category category = Category::kCaste;
  Label label = Label::kStereotype;
  std::string text;
};

// All sentences sharing one context. Members keep file order.
struct ContextGroup {
  std::string context_id;
  Category category = Category::kCaste;
  std::vector<SentenceRecord> stereotypes;
  std::vector<SentenceRecord> anti_stereotypes;

  std::size_t size() const { return stereotypes.size() + anti_stereotypes.size(); }
};

struct EvalItem {
  std::string item_id;
  Category category = Category::kCaste;
  std::string masked_sentence;
  std::string stereotype_sentence;
  std::string anti_stereotype_sentence;
  std::string bias_type_hint;
};

struct CorpusSplit {
  std::vector<ContextGroup> train;
  std::vector<ContextGroup> validation;
  std::uint64_t seed = 0;
  double fraction = 0.2;
};

struct CategoryCounts {
  std::size_t contexts = 0;
  std::size_t stereotypes = 0;
  std::size_t anti_stereotypes = 0;
  std::size_t total() const { return stereotypes + anti_stereotypes; }
};

struct CorpusStats {
  std::map<Category, CategoryCounts> per_category;
  CategoryCounts overall;
};

enum class CorpusFormat { kJsonl, kCsv };

// Groups rows by context_id (first-appearance order). Malformed rows are
// rejected with their 1-based line number in the error message.
std::vector<ContextGroup> load_indicasa(const std::filesystem::path& path,
                                        CorpusFormat format);
std::vector<ContextGroup> parse_indicasa(std::istream& in, CorpusFormat format);

// Picks the format from the file extension (.csv → CSV, everything else JSONL).
std::vector<ContextGroup> load_indicasa(const std::filesystem::path& path);

void write_indicasa_jsonl(const std::vector<ContextGroup>& groups, std::ostream& out);
void write_indicasa_jsonl(const std::vector<ContextGroup>& groups,
                          const std::filesystem::path& path);

CorpusStats corpus_stats(const std::vector<ContextGroup>& groups);

std::vector<EvalItem> load_eval_set(const std::filesystem::path& path);
std::vector<EvalItem> parse_eval_set(std::istream& in);
void write_eval_set_jsonl(const std::vector<EvalItem>& items, std::ostream& out);

// Validation receives ceil(fraction * N) whole contexts, capped at N - 1.
CorpusSplit split_by_context(const std::vector<ContextGroup>& groups,
                             double fraction, std::uint64_t seed);

std::vector<ContextGroup> filter_by_category(const std::vector<ContextGroup>& groups,
                                             Category category);

}  // namespace contrabias
