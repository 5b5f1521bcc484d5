#include "contrabias/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "contrabias/error.hpp"
#include "contrabias/log.hpp"
#include "contrabias/random.hpp"

namespace contrabias {
namespace {

using nlohmann::json;

std::string trim(std::string_view text) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

std::string line_tag(std::size_t line) { return "line " + std::to_string(line); }

// Splits one CSV record (RFC 4180 quoting). Returns false when a quoted
// field is still open at end of line so the caller can append the next line.
bool split_csv_record(const std::string& record, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < record.size(); ++i) {
    const char c = record[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < record.size() && record[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return !quoted;
}

struct RawRow {
  std::size_t line = 0;
  std::unordered_map<std::string, std::string> fields;
};

std::vector<RawRow> read_jsonl_rows(std::istream& in) {
  std::vector<RawRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  line_tag(line_no) + ": invalid JSON (" + e.what() + ")");
    }
    if (!value.is_object()) {
      throw Error(ErrorCode::kInvalidArgument, line_tag(line_no) + ": expected a JSON object");
    }
    RawRow row;
    row.line = line_no;
    for (const auto& [key, v] : value.items()) {
      if (v.is_string()) {
        row.fields[key] = v.get<std::string>();
      } else if (v.is_number_integer()) {
        row.fields[key] = std::to_string(v.get<long long>());
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RawRow> read_csv_rows(std::istream& in) {
  std::vector<RawRow> rows;
  std::vector<std::string> header;
  std::vector<std::string> fields;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t start_line = line_no;
    std::string record = line;
    while (!split_csv_record(record, fields)) {
      std::string more;
      if (!std::getline(in, more)) {
        throw Error(ErrorCode::kInvalidArgument,
                    line_tag(start_line) + ": unterminated quoted field");
      }
      ++line_no;
      record += "\n" + more;
    }
    if (header.empty()) {
      for (auto& f : fields) header.push_back(trim(f));
      continue;
    }
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    RawRow row;
    row.line = start_line;
    for (std::size_t i = 0; i < fields.size() && i < header.size(); ++i) {
      row.fields[header[i]] = fields[i];
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

const std::string& require_field(const RawRow& row, const std::string& key) {
  auto it = row.fields.find(key);
  if (it == row.fields.end()) {
    throw Error(ErrorCode::kMissingField,
                line_tag(row.line) + ": missing field '" + key + "'");
  }
  return it->second;
}

Category require_category(const RawRow& row) {
  const std::string& raw = require_field(row, "category");
  auto category = parse_category(raw);
  if (!category) {
    throw Error(ErrorCode::kUnknownCategory,
                line_tag(row.line) + ": unknown category '" + raw + "'");
  }
  return *category;
}

std::string normalize_mask(const std::string& text, std::size_t line) {
  static constexpr std::string_view kBracketMask = "[MASK]";
  if (text.find(kBracketMask) == std::string::npos) return text;
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(kBracketMask, pos);
    if (hit == std::string::npos) break;
    out.append(text, pos, hit - pos);
    out.append(kMaskToken);
    pos = hit + kBracketMask.size();
  }
  out.append(text, pos, std::string::npos);
  warn(line_tag(line) + ": normalized \"[MASK]\" to \"<MASK>\"");
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return in;
}

}  // namespace

std::vector<ContextGroup> parse_indicasa(std::istream& in, CorpusFormat format) {
  const std::vector<RawRow> rows =
      format == CorpusFormat::kCsv ? read_csv_rows(in) : read_jsonl_rows(in);

  std::vector<ContextGroup> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (const RawRow& row : rows) {
    SentenceRecord record;
    record.context_id = trim(require_field(row, "context_id"));
    if (record.context_id.empty()) {
      throw Error(ErrorCode::kMissingField, line_tag(row.line) + ": empty context_id");
    }
    record.category = require_category(row);
    const std::string& raw_label = require_field(row, "label");
    auto label = parse_label(raw_label);
    if (!label) {
      throw Error(ErrorCode::kUnknownLabel,
                  line_tag(row.line) + ": unknown label '" + raw_label + "'");
    }
    record.label = *label;
    record.text = trim(require_field(row, "text"));
    if (record.text.empty()) {
      throw Error(ErrorCode::kMissingField, line_tag(row.line) + ": empty text");
    }

    auto [it, inserted] = index.try_emplace(record.context_id, groups.size());
    if (inserted) {
      ContextGroup group;
      group.context_id = record.context_id;
      group.category = record.category;
      groups.push_back(std::move(group));
    }
    ContextGroup& group = groups[it->second];
    if (group.category != record.category) {
      throw Error(ErrorCode::kInvalidArgument,
                  line_tag(row.line) + ": context '" + record.context_id +
                      "' already has category " + std::string(to_string(group.category)));
    }
    (record.label == Label::kStereotype ? group.stereotypes : group.anti_stereotypes)
        .push_back(std::move(record));
  }
  if (groups.empty()) throw Error(ErrorCode::kEmptyCorpus, "no sentence rows found");
  return groups;
}

std::vector<ContextGroup> load_indicasa(const std::filesystem::path& path,
                                        CorpusFormat format) {
  auto in = open_input(path);
  return parse_indicasa(in, format);
}

std::vector<ContextGroup> load_indicasa(const std::filesystem::path& path) {
  return load_indicasa(path, path.extension() == ".csv" ? CorpusFormat::kCsv
                                                        : CorpusFormat::kJsonl);
}

void write_indicasa_jsonl(const std::vector<ContextGroup>& groups, std::ostream& out) {
  for (const ContextGroup& group : groups) {
    for (const auto* members : {&group.stereotypes, &group.anti_stereotypes}) {
      for (const SentenceRecord& r : *members) {
        json row = {{"context_id", r.context_id},
                    {"category", to_string(r.category)},
                    {"label", to_string(r.label)},
                    {"text", r.text}};
        out << row.dump() << '\n';
      }
    }
  }
}

void write_indicasa_jsonl(const std::vector<ContextGroup>& groups,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  write_indicasa_jsonl(groups, out);
}

CorpusStats corpus_stats(const std::vector<ContextGroup>& groups) {
  CorpusStats stats;
  for (const ContextGroup& g : groups) {
    for (CategoryCounts* counts : {&stats.per_category[g.category], &stats.overall}) {
      counts->contexts += 1;
      counts->stereotypes += g.stereotypes.size();
      counts->anti_stereotypes += g.anti_stereotypes.size();
    }
  }
  return stats;
}

std::vector<EvalItem> parse_eval_set(std::istream& in) {
  std::vector<EvalItem> items;
  for (const RawRow& row : read_jsonl_rows(in)) {
    EvalItem item;
    auto id = row.fields.find("item_id");
    item.item_id = id != row.fields.end() ? id->second : "item-" + std::to_string(row.line);
    item.category = require_category(row);
    item.masked_sentence = normalize_mask(require_field(row, "masked_sentence"), row.line);
    if (item.masked_sentence.find(kMaskToken) == std::string::npos) {
      throw Error(ErrorCode::kMaskTokenMissing,
                  line_tag(row.line) + ": masked_sentence lacks \"<MASK>\"");
    }
    item.stereotype_sentence = trim(require_field(row, "stereotype_sentence"));
    item.anti_stereotype_sentence = trim(require_field(row, "anti_stereotype_sentence"));
    if (item.stereotype_sentence.empty() || item.anti_stereotype_sentence.empty()) {
      throw Error(ErrorCode::kMissingField, line_tag(row.line) + ": empty reference sentence");
    }
    if (item.stereotype_sentence == item.anti_stereotype_sentence) {
      throw Error(ErrorCode::kInvalidArgument,
                  line_tag(row.line) + ": stereotype and anti-stereotype sentences are identical");
    }
    auto hint = row.fields.find("bias_type_hint");
    item.bias_type_hint = hint != row.fields.end() ? hint->second
                                                   : std::string(to_string(item.category));
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<EvalItem> load_eval_set(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_eval_set(in);
}

void write_eval_set_jsonl(const std::vector<EvalItem>& items, std::ostream& out) {
  for (const EvalItem& item : items) {
    json row = {{"item_id", item.item_id},
                {"category", to_string(item.category)},
                {"masked_sentence", item.masked_sentence},
                {"stereotype_sentence", item.stereotype_sentence},
                {"anti_stereotype_sentence", item.anti_stereotype_sentence},
                {"bias_type_hint", item.bias_type_hint}};
    out << row.dump() << '\n';
  }
}

CorpusSplit split_by_context(const std::vector<ContextGroup>& groups, double fraction,
                             std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split fraction must lie in (0, 1)");
  }
  if (groups.size() < 2) {
    throw Error(ErrorCode::kTooFewContexts,
                "need at least 2 contexts, got " + std::to_string(groups.size()));
  }
  const std::size_t n = groups.size();
  std::size_t n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> in_validation(n, false);
  for (std::size_t i = 0; i < n_val; ++i) in_validation[order[i]] = true;

  CorpusSplit split;
  split.seed = seed;
  split.fraction = fraction;
  for (std::size_t i = 0; i < n; ++i) {
    (in_validation[i] ? split.validation : split.train).push_back(groups[i]);
  }
  return split;
}

std::vector<ContextGroup> filter_by_category(const std::vector<ContextGroup>& groups,
                                             Category category) {
  std::vector<ContextGroup> out;
  std::copy_if(groups.begin(), groups.end(), std::back_inserter(out),
               [category](const ContextGroup& g) { return g.category == category; });
  return out;
}

}  // namespace contrabias
