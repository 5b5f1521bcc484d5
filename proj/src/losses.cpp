#include "contrabias/losses.hpp"

#include <cmath>

#include "contrabias/error.hpp"

namespace contrabias {
namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct Normalized {
  Eigen::MatrixXd unit;
  Eigen::VectorXd norms;
};

Normalized normalize_rows(const Eigen::MatrixXd& x) {
  Normalized out{x, x.rowwise().norm()};
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!(out.norms[i] > 0.0)) {
      throw Error(ErrorCode::kZeroVector, "batch row " + std::to_string(i) + " is zero");
    }
    out.unit.row(i) /= out.norms[i];
  }
  return out;
}

// Chain rule from dL/dS to dL/dX for S = cos(x_i, x_j).
Eigen::MatrixXd similarity_to_embedding_gradient(const Normalized& n,
                                                 const Eigen::MatrixXd& grad_similarity) {
  const Eigen::MatrixXd grad_unit = (grad_similarity + grad_similarity.transpose()) * n.unit;
  Eigen::MatrixXd grad(n.unit.rows(), n.unit.cols());
  for (Eigen::Index i = 0; i < n.unit.rows(); ++i) {
    const auto u = n.unit.row(i);
    const auto g = grad_unit.row(i);
    grad.row(i) = (g - u * u.dot(g)) / n.norms[i];
  }
  return grad;
}

BoolMatrix same_context(const PairBatch& batch) {
  const Eigen::Index n = batch.size();
  BoolMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      m(i, j) = i != j && batch.context_ids[static_cast<std::size_t>(i)] ==
                              batch.context_ids[static_cast<std::size_t>(j)];
    }
  }
  return m;
}

double ntb_xent_impl(const Eigen::MatrixXd& s, const BoolMatrix& pos, const BoolMatrix& neg,
                     double tau, Eigen::MatrixXd* grad) {
  const Eigen::Index n = s.rows();
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (pos(i, j)) {
        pos_sum += softplus(-s(i, j) / tau);
        ++n_pos;
      } else if (neg(i, j)) {
        neg_sum += softplus(-(1.0 - s(i, j)) / tau);
        ++n_neg;
      }
    }
  }
  if (n_pos == 0) throw Error(ErrorCode::kNoPositivePair, "batch has no positive pair");
  if (n_neg == 0) throw Error(ErrorCode::kNoNegativePair, "batch has no negative pair");
  if (grad) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (pos(i, j)) {
          (*grad)(i, j) = -sigmoid(-s(i, j) / tau) / tau / static_cast<double>(n_pos);
        } else if (neg(i, j)) {
          (*grad)(i, j) = sigmoid(-(1.0 - s(i, j)) / tau) / tau / static_cast<double>(n_neg);
        }
      }
    }
  }
  return pos_sum / static_cast<double>(n_pos) + neg_sum / static_cast<double>(n_neg);
}

double pairwise_impl(const Eigen::MatrixXd& s, const BoolMatrix& pos, const BoolMatrix& neg,
                     double margin, Eigen::MatrixXd* grad) {
  const Eigen::Index n = s.rows();
  double total = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (pos(i, j)) {
        total += 1.0 - s(i, j);
        ++count;
      } else if (neg(i, j)) {
        total += std::max(0.0, s(i, j) - margin);
        ++count;
      }
    }
  }
  if (count == 0) throw Error(ErrorCode::kNoLabeledPairs, "batch has no same-context pair");
  if (grad) {
    const double w = 1.0 / static_cast<double>(count);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if (pos(i, j)) {
          (*grad)(i, j) = -w;
        } else if (neg(i, j) && s(i, j) > margin) {
          (*grad)(i, j) = w;
        }
      }
    }
  }
  return total / static_cast<double>(count);
}

// Batch-all mining: every (anchor, positive, negative) inside one context.
// The mean runs over all of them, not just the active ones, so the loss stays
// continuous as triplets cross the margin.
double triplet_impl(const Eigen::MatrixXd& s, const BoolMatrix& pos, const BoolMatrix& neg,
                    double margin, Eigen::MatrixXd* grad) {
  const Eigen::Index n = s.rows();
  double total = 0.0;
  std::size_t triplets = 0;
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index p = 0; p < n; ++p) {
      if (!pos(a, p)) continue;
      for (Eigen::Index q = 0; q < n; ++q) {
        if (!neg(a, q)) continue;
        ++triplets;
        const double hinge = s(a, q) - s(a, p) + margin;
        if (hinge > 0.0) {
          total += hinge;
          local(a, q) += 1.0;
          local(a, p) -= 1.0;
        }
      }
    }
  }
  if (triplets == 0) {
    throw Error(ErrorCode::kNoTripletConstructible, "batch has no (anchor, positive, negative)");
  }
  if (grad) *grad = local / static_cast<double>(triplets);
  return total / static_cast<double>(triplets);
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kNtXent: return "nt_xent";
    case LossKind::kNtbXent: return "ntb_xent";
    case LossKind::kPairwise: return "pairwise";
    case LossKind::kTriplet: return "triplet";
  }
  return "unknown";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "nt_xent" || text == "ntxent") return LossKind::kNtXent;
  if (text == "ntb_xent" || text == "ntbxent") return LossKind::kNtbXent;
  if (text == "pairwise" || text == "pair") return LossKind::kPairwise;
  if (text == "triplet") return LossKind::kTriplet;
  throw Error(ErrorCode::kInvalidArgument, "unknown loss '" + std::string(text) + "'");
}

bool uses_temperature(LossKind kind) {
  return kind == LossKind::kNtXent || kind == LossKind::kNtbXent;
}

void LossConfig::validate() const {
  if (uses_temperature(kind)) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw Error(ErrorCode::kIncompatibleLossConfig,
                  std::string(to_string(kind)) + " needs a positive temperature");
    }
  } else if (!(margin > 0.0 && margin < 1.0)) {
    throw Error(ErrorCode::kIncompatibleLossConfig,
                std::string(to_string(kind)) + " needs a margin in (0, 1)");
  }
}

void PairBatch::validate() const {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (labels.size() != n || context_ids.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "labels/context_ids must match embedding rows");
  }
}

Eigen::MatrixXd similarity_matrix(const PairBatch& batch) {
  const Normalized n = normalize_rows(batch.embeddings);
  return n.unit * n.unit.transpose();
}

BoolMatrix positive_mask(const PairBatch& batch) {
  batch.validate();
  BoolMatrix m = same_context(batch);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = m(i, j) &&
                batch.labels[static_cast<std::size_t>(i)] == batch.labels[static_cast<std::size_t>(j)];
    }
  }
  return m;
}

BoolMatrix negative_mask(const PairBatch& batch) {
  batch.validate();
  BoolMatrix m = same_context(batch);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = m(i, j) &&
                batch.labels[static_cast<std::size_t>(i)] != batch.labels[static_cast<std::size_t>(j)];
    }
  }
  return m;
}

double nt_xent_from_similarity(const Eigen::MatrixXd& s, const BoolMatrix& positive,
                               const BoolMatrix& candidates, double tau,
                               Eigen::MatrixXd* grad) {
  const Eigen::Index n = s.rows();
  std::vector<Eigen::Index> anchors;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (positive.row(i).any()) anchors.push_back(i);
  }
  if (anchors.empty()) throw Error(ErrorCode::kNoPositivePair, "no anchor has a positive");

  const double anchor_weight = 1.0 / static_cast<double>(anchors.size());
  double total = 0.0;
  for (Eigen::Index i : anchors) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (candidates(i, k)) max_logit = std::max(max_logit, s(i, k) / tau);
    }
    double denom = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (candidates(i, k)) denom += std::exp(s(i, k) / tau - max_logit);
    }
    const double log_denom = max_logit + std::log(denom);
    double anchor_loss = 0.0;
    std::size_t n_pos = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!positive(i, j)) continue;
      anchor_loss += log_denom - s(i, j) / tau;
      ++n_pos;
    }
    total += anchor_weight * anchor_loss / static_cast<double>(n_pos);
    if (grad) {
      const double term_weight = anchor_weight / static_cast<double>(n_pos);
      for (Eigen::Index k = 0; k < n; ++k) {
        if (candidates(i, k)) {
          // n_pos terms each contribute softmax_k / tau.
          (*grad)(i, k) += anchor_weight * std::exp(s(i, k) / tau - log_denom) / tau;
        }
        if (positive(i, k)) (*grad)(i, k) -= term_weight / tau;
      }
    }
  }
  return total;
}

LossOutput compute_loss(const PairBatch& batch, const LossConfig& config, bool with_gradient) {
  config.validate();
  batch.validate();
  const Normalized n = normalize_rows(batch.embeddings);
  const Eigen::MatrixXd s = n.unit * n.unit.transpose();
  const BoolMatrix pos = positive_mask(batch);
  const BoolMatrix neg = negative_mask(batch);

  Eigen::MatrixXd grad_s;
  Eigen::MatrixXd* grad_ptr = nullptr;
  if (with_gradient) {
    grad_s = Eigen::MatrixXd::Zero(batch.size(), batch.size());
    grad_ptr = &grad_s;
  }

  LossOutput out;
  switch (config.kind) {
    case LossKind::kNtXent:
      if (!neg.any()) throw Error(ErrorCode::kNoNegativePair, "batch has no negative pair");
      out.value = nt_xent_from_similarity(s, pos, same_context(batch), config.temperature, grad_ptr);
      break;
    case LossKind::kNtbXent:
      out.value = ntb_xent_impl(s, pos, neg, config.temperature, grad_ptr);
      break;
    case LossKind::kPairwise:
      out.value = pairwise_impl(s, pos, neg, config.margin, grad_ptr);
      break;
    case LossKind::kTriplet:
      out.value = triplet_impl(s, pos, neg, config.margin, grad_ptr);
      break;
  }
  if (with_gradient) out.gradient = similarity_to_embedding_gradient(n, grad_s);
  return out;
}

namespace {
double loss_of_kind(const PairBatch& batch, LossConfig config, LossKind kind) {
  config.kind = kind;
  return compute_loss(batch, config, false).value;
}
}  // namespace

double nt_xent(const PairBatch& batch, const LossConfig& config) {
  return loss_of_kind(batch, config, LossKind::kNtXent);
}
double ntb_xent(const PairBatch& batch, const LossConfig& config) {
  return loss_of_kind(batch, config, LossKind::kNtbXent);
}
double pairwise(const PairBatch& batch, const LossConfig& config) {
  return loss_of_kind(batch, config, LossKind::kPairwise);
}
double triplet(const PairBatch& batch, const LossConfig& config) {
  return loss_of_kind(batch, config, LossKind::kTriplet);
}

}  // namespace contrabias
