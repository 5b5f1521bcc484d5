#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "contrabias/bias_scoring.hpp"
#include "contrabias/losses.hpp"
#include "contrabias/trainer.hpp"

namespace contrabias {

// reports/<run_id>/{tables,figures,json}
struct ReportPaths {
  std::filesystem::path root;
  std::filesystem::path tables;
  std::filesystem::path figures;
  std::filesystem::path json;
};

ReportPaths make_report_dirs(const std::filesystem::path& base, const std::string& run_id);

// --- t-SNE -------------------------------------------------------------------

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 0;
};

// Exact t-SNE to two dimensions. Throws TooFewPoints for fewer than 5 rows or
// perplexity >= row count.
Eigen::MatrixXd tsne(const Eigen::MatrixXd& points, const TsneConfig& config = {});

struct TsneProjection {
  std::string title;
  Eigen::MatrixXd coordinates;  // N x 2
  std::vector<std::string> labels;
};

nlohmann::json to_json(const TsneProjection& projection);
TsneProjection tsne_projection_from_json(const nlohmann::json& j);
void write_tsne_csv(const TsneProjection& projection, std::ostream& out);
std::string render_tsne_svg(const TsneProjection& projection);

// Projects, then writes <stem>.csv and <stem>.svg under figures and
// <stem>.json under json.
TsneProjection emit_tsne(const Eigen::MatrixXd& points, const std::vector<std::string>& labels,
                         const TsneConfig& config, const ReportPaths& paths,
                         const std::string& stem, const std::string& title = "");

// --- Sweep heatmaps ------------------------------------------------------------

struct Heatmap {
  std::string title;
  std::string row_name;  // "temperature" or "margin"
  std::vector<double> rows;
  std::vector<int> columns;  // epoch budgets
  // values[r][c]; empty when no run exists or the run failed.
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<std::vector<std::string>> failures;
};

// Rows are the loss hyperparameter, columns the epoch budget, cells the max
// validation delta_sim of the run. Only records of `kind` are used.
Heatmap sweep_heatmap(const std::vector<TrainRunRecord>& records, LossKind kind);
void write_heatmap_csv(const Heatmap& heatmap, std::ostream& out);
std::string render_heatmap_svg(const Heatmap& heatmap);

// One heatmap per loss present in `records`; returns the CSV paths.
std::vector<std::filesystem::path> emit_sweep_heatmap(const std::vector<TrainRunRecord>& records,
                                                      const ReportPaths& paths);

// --- Bias tables ---------------------------------------------------------------

// Rows per model with probability and score sub-rows; the lowest score in
// each column is bolded. Adds a skip-ratio column when any ratio is nonzero.
std::string bias_table_markdown(const std::vector<BiasReport>& reports);
void write_bias_table_csv(const std::vector<BiasReport>& reports, std::ostream& out);
void emit_bias_table(const std::vector<BiasReport>& reports, const ReportPaths& paths,
                     const std::string& stem = "bias_scores");

// Regenerates every table and figure it recognizes from the JSON files in
// paths.json. Returns the number of artifacts written.
int regenerate_from_json(const ReportPaths& paths);

}  // namespace contrabias
