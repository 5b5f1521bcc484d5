#pragma once

#include <Eigen/Dense>

namespace contrabias {

struct AdamWConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay over one flat parameter vector.
class AdamW {
 public:
  AdamW(Eigen::Index size, const AdamWConfig& config);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long steps() const { return steps_; }

 private:
  AdamWConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long steps_ = 0;
};

// Rescales grad in place so its L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_global_norm(Eigen::VectorXd& grad, double max_norm);

}  // namespace contrabias
