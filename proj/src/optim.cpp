#include "contrabias/optim.hpp"

#include <cmath>

#include "contrabias/error.hpp"

namespace contrabias {

AdamW::AdamW(Eigen::Index size, const AdamWConfig& config)
    : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {
  if (config.learning_rate < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "learning rate must be non-negative");
  }
}

void AdamW::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer state does not match parameters");
  }
  ++steps_;
  const double lr = config_.learning_rate;
  if (lr == 0.0) return;
  m_ = config_.beta1 * m_ + (1.0 - config_.beta1) * grad;
  v_ = config_.beta2 * v_ + (1.0 - config_.beta2) * grad.cwiseProduct(grad);
  const double bias1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  params *= 1.0 - lr * config_.weight_decay;
  params.array() -= lr * (m_.array() / bias1) / ((v_.array() / bias2).sqrt() + config_.epsilon);
}

double clip_global_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (max_norm > 0.0 && norm > max_norm) grad *= max_norm / norm;
  return norm;
}

}  // namespace contrabias
