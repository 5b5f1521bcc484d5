#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "contrabias/types.hpp"

namespace contrabias {

enum class LossKind { kNtXent, kNtbXent, kPairwise, kTriplet };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

// True for the temperature-scaled losses; false for the margin losses.
bool uses_temperature(LossKind kind);

struct LossConfig {
  LossKind kind = LossKind::kNtbXent;
  double temperature = 0.1;
  double margin = 0.5;

  // Throws IncompatibleLossConfig when tau <= 0 (NT-Xent family) or the
  // margin leaves (0, 1) (pairwise/triplet).
  void validate() const;
};

// A batch of embeddings. Rows need not be normalized: similarities are
// cosines, and gradients flow through the normalization.
struct PairBatch {
  Eigen::MatrixXd embeddings;
  std::vector<Label> labels;
  std::vector<std::string> context_ids;

  Eigen::Index size() const { return embeddings.rows(); }
  void validate() const;
};

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

Eigen::MatrixXd similarity_matrix(const PairBatch& batch);

// Same context, same label, i != j.
BoolMatrix positive_mask(const PairBatch& batch);
// Same context, opposite labels. Cross-context pairs are in neither mask.
BoolMatrix negative_mask(const PairBatch& batch);

struct LossOutput {
  double value = 0.0;
  // dLoss/dEmbeddings, same shape as batch.embeddings; empty unless requested.
  Eigen::MatrixXd gradient;
};

// Losses as functions of a similarity matrix. `grad_similarity`, when
// non-null, receives dLoss/dS treating every S_ij (i != j) as independent.
double nt_xent_from_similarity(const Eigen::MatrixXd& similarity, const BoolMatrix& positive,
                               const BoolMatrix& candidates, double temperature,
                               Eigen::MatrixXd* grad_similarity = nullptr);

LossOutput compute_loss(const PairBatch& batch, const LossConfig& config, bool with_gradient);

double nt_xent(const PairBatch& batch, const LossConfig& config);
double ntb_xent(const PairBatch& batch, const LossConfig& config);
double pairwise(const PairBatch& batch, const LossConfig& config);
double triplet(const PairBatch& batch, const LossConfig& config);

}  // namespace contrabias
