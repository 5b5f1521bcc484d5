#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "contrabias/corpus.hpp"
#include "contrabias/embedder.hpp"

namespace contrabias {

enum class EncoderMode { kFrozenVanilla, kFrozenContrastive, kUnfrozenVanilla, kUnfrozenContrastive };

std::string_view to_string(EncoderMode mode);
EncoderMode parse_encoder_mode(std::string_view text);
bool is_frozen(EncoderMode mode);

// D -> D/2 -> 1 with ReLU hidden units and a sigmoid output giving
// P(stereotype). Parameters are stored flat: W1 (H x D, row-major), b1, w2, b2.
class MlpHead {
 public:
  MlpHead() = default;
  MlpHead(int input_dim, std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }

  // One logit per row of x (N x D).
  Eigen::VectorXd logits(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict_proba(const Eigen::MatrixXd& x) const;

  // Mean binary cross-entropy against `targets` (1 = stereotype). When
  // grad_params is non-null it receives dLoss/dParams; grad_inputs likewise
  // receives dLoss/dx.
  double bce(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
             Eigen::VectorXd* grad_params = nullptr, Eigen::MatrixXd* grad_inputs = nullptr) const;

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  nlohmann::json to_json() const;
  static MlpHead from_json(const nlohmann::json& j);

 private:
  int input_dim_ = 0;
  int hidden_dim_ = 0;
  Eigen::VectorXd params_;
};

struct HeadTrainConfig {
  EncoderMode mode = EncoderMode::kFrozenVanilla;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  int batch_size = 64;
  int max_epochs = 50;
  int patience = 10;
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HeadEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct HeadTrainResult {
  MlpHead head;
  std::vector<HeadEpoch> history;
  int best_epoch = 0;
};

// Labelled sentence embeddings; labels are 1 for stereotype.
struct LabeledSet {
  Eigen::MatrixXd embeddings;
  Eigen::VectorXd targets;
  std::vector<Category> categories;
};

LabeledSet embed_labeled(const std::vector<ContextGroup>& groups, const EncoderHandle& handle);

// Head-only training on fixed embeddings; returns the best-validation head.
HeadTrainResult train_head_on_embeddings(const LabeledSet& train, const LabeledSet& validation,
                                         const HeadTrainConfig& config);

// Frozen modes embed once and train the head alone. Unfrozen modes train the
// encoder (which must support training) jointly with the head and leave the
// best-epoch encoder weights loaded in `handle`.
HeadTrainResult train_head(EncoderHandle& handle, const CorpusSplit& split,
                           const HeadTrainConfig& config);

// Positive class = stereotype.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  Confusion& operator+=(const Confusion& other);
};

// Mean of the two per-class F1 scores. A class that is absent and never
// predicted scores 1.
double macro_f1(const Confusion& c);

struct F1Report {
  EncoderMode mode = EncoderMode::kFrozenVanilla;
  double threshold = 0.5;
  double macro_f1 = 0.0;
  Confusion confusion;
  std::map<Category, double> per_category_f1;
  std::map<Category, Confusion> per_category_confusion;
};

F1Report score_predictions(const Eigen::VectorXd& probabilities, const LabeledSet& truth,
                           EncoderMode mode, double threshold = 0.5);

F1Report evaluate_head(const MlpHead& head, const EncoderHandle& handle,
                       const std::vector<ContextGroup>& groups, EncoderMode mode,
                       double threshold = 0.5);

nlohmann::json to_json(const F1Report& report);

void save_head(const MlpHead& head, const std::filesystem::path& path,
               const nlohmann::json& extra = {});
MlpHead load_head(const std::filesystem::path& path);

}  // namespace contrabias
