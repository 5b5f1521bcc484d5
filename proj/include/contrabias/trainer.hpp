#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrabias/corpus.hpp"
#include "contrabias/embedder.hpp"
#include "contrabias/losses.hpp"

namespace contrabias {

enum class StopMetric { kValidationLoss, kValidationDeltaSim };

struct TrainConfig {
  LossConfig loss;
  double learning_rate = 5e-5;
  int batch_size = 256;
  int max_epochs = 30;
  int patience = 3;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
  StopMetric stop_metric = StopMetric::kValidationLoss;
  // When set, the best weights are written to <checkpoint_dir>/<run_id>/.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::string run_id;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;  // 0 = before any update
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_delta_sim = 0.0;
};

struct TrainRunRecord {
  TrainConfig config;
  std::vector<EpochMetrics> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
  std::optional<std::filesystem::path> best_checkpoint;
  // Set when the run failed (sweep cells keep going).
  std::optional<std::string> failure;

  double max_validation_delta_sim() const;
  const EpochMetrics& best() const;
};

// One packed batch of whole contexts.
struct SentenceBatch {
  std::vector<std::string> texts;
  std::vector<Label> labels;
  std::vector<std::string> context_ids;
  std::vector<std::size_t> group_indices;
};

// Greedy packing of whole contexts in a seed-permuted order; a context never
// straddles two batches. Throws ContextLargerThanBatch.
std::vector<SentenceBatch> make_batches(const std::vector<ContextGroup>& groups, int batch_size,
                                        std::uint64_t seed);
// Same packing without permutation (used for validation).
std::vector<SentenceBatch> make_batches_in_order(const std::vector<ContextGroup>& groups,
                                                 int batch_size);

// Patience-based early stopping on a metric where lower is better.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Returns true when the observation improved on the best so far.
  bool observe(double value);
  bool should_stop() const { return bad_epochs_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  int bad_epochs_ = 0;
  double best_;
};

// Mean loss over the batches that admit the configured loss.
double evaluate_loss(const EncoderHandle& handle, const std::vector<SentenceBatch>& batches,
                     const LossConfig& loss);

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Fine-tunes handle's encoder in place (a frozen handle is evaluated but never
// updated) and leaves the best-epoch weights loaded.
TrainRunRecord train(EncoderHandle& handle, const CorpusSplit& split, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

struct SweepGrid {
  std::vector<double> temperatures = {0.1, 0.5, 1.0, 10.0, 20.0, 30.0};
  std::vector<double> margins = {0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<int> epochs = {30, 50, 100};
};

struct SweepResult {
  std::vector<TrainRunRecord> records;
  // Index into records of the best cell per loss (max validation delta_sim).
  std::map<LossKind, std::size_t> best_per_loss;
};

// One independent training run (fresh clone of `handle`) per
// (loss, hyperparameter, epochs) cell. Cell failures are recorded, not thrown.
SweepResult sweep(const EncoderHandle& handle, const CorpusSplit& split, const SweepGrid& grid,
                  const std::vector<LossKind>& losses, const TrainConfig& base);

nlohmann::json to_json(const TrainConfig& config);
nlohmann::json to_json(const TrainRunRecord& record);
TrainRunRecord train_record_from_json(const nlohmann::json& j);

// Per-epoch metrics, one row per (run, epoch).
void write_metrics_csv(const std::vector<TrainRunRecord>& records, std::ostream& out);

}  // namespace contrabias
