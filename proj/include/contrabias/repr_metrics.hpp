#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "contrabias/corpus.hpp"
#include "contrabias/embedder.hpp"

namespace contrabias {

struct SimStats {
  double mu_intra = 0.0;
  double mu_inter = 0.0;
  double delta_sim = 0.0;
  std::size_t n_intra_pairs = 0;
  std::size_t n_inter_pairs = 0;
};

struct SimReport {
  double mu_intra = 0.0;
  double mu_inter = 0.0;
  double delta_sim = 0.0;
  std::size_t n_intra_pairs = 0;
  std::size_t n_inter_pairs = 0;
  // Categories lacking intra or inter pairs are absent.
  std::map<Category, SimStats> per_category;
};

// Embeddings of one context, split by class. Rows must be unit-norm.
struct ContextEmbeddings {
  Category category = Category::kCaste;
  Eigen::MatrixXd stereotypes;
  Eigen::MatrixXd anti_stereotypes;
};

// Pair-weighted pooled means over same-context pairs:
//   mu_intra = sum_c [sum_{a<a'} s + sum_{s<s'} s] / sum_c [C(|A_c|,2) + C(|S_c|,2)]
//   mu_inter = sum_c sum_{a,s} s / sum_c |A_c||S_c|
// Uses per-context vector sums, so cost is O(N * D).
SimStats pooled_similarity(std::span<const ContextEmbeddings> contexts);

std::vector<ContextEmbeddings> embed_contexts(const std::vector<ContextGroup>& groups,
                                              const EncoderHandle& handle);

SimReport delta_sim(std::span<const ContextEmbeddings> contexts);
SimReport delta_sim(const std::vector<ContextGroup>& groups, const EncoderHandle& handle);

// Pre-fine-tuning reference values, for regression display only.
struct BareReference {
  double overall;
  std::map<Category, double> per_category;
};
std::map<std::string, BareReference> delta_sim_bare_reference();

nlohmann::json to_json(const SimReport& report);
std::string format_sim_table(const SimReport& report);

}  // namespace contrabias
