#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "contrabias/error.hpp"
#include "contrabias/losses.hpp"

namespace contrabias {
namespace {

constexpr Label S = Label::kStereotype;
constexpr Label A = Label::kAntiStereotype;

PairBatch batch_of(std::initializer_list<std::initializer_list<double>> rows, std::vector<Label> labels,
                   std::vector<std::string> contexts) {
  PairBatch b;
  const auto cols = static_cast<Eigen::Index>(rows.begin()->size());
  b.embeddings.resize(static_cast<Eigen::Index>(rows.size()), cols);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) b.embeddings(i, j++) = v;
    ++i;
  }
  b.labels = std::move(labels);
  b.context_ids = std::move(contexts);
  return b;
}

LossConfig config(LossKind kind, double tau = 1.0, double margin = 0.5) {
  LossConfig c;
  c.kind = kind;
  c.temperature = tau;
  c.margin = margin;
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

// Two identical stereotypes and one orthogonal anti-stereotype in one context.
PairBatch unit_batch() { return batch_of({{1, 0}, {1, 0}, {0, 1}}, {S, S, A}, {"c", "c", "c"}); }

TEST(Masks, Definition) {
  const PairBatch b = batch_of({{1, 0}, {0, 1}, {1, 1}, {1, 2}}, {S, S, A, S}, {"c", "c", "c", "d"});
  const BoolMatrix pos = positive_mask(b);
  const BoolMatrix neg = negative_mask(b);
  EXPECT_TRUE(pos(0, 1) && pos(1, 0));
  EXPECT_FALSE(pos(0, 0));
  EXPECT_TRUE(neg(0, 2) && neg(2, 1));
  EXPECT_FALSE(neg(0, 1));
  // Row 3 is alone in context d.
  EXPECT_FALSE(pos.row(3).any() || neg.row(3).any() || pos.col(3).any() || neg.col(3).any());
}

TEST(Similarity, SymmetricUnitDiagonal) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  PairBatch b;
  b.embeddings = Eigen::MatrixXd::NullaryExpr(7, 5, [&] { return n(rng); });
  const Eigen::MatrixXd s = similarity_matrix(b);
  EXPECT_LT((s - s.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(s(i, i), 1.0, 1e-12);
  EXPECT_LE(s.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
}

TEST(NtXent, ClosedForm) {
  EXPECT_NEAR(nt_xent(unit_batch(), config(LossKind::kNtXent)), -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0)),
              1e-12);
  EXPECT_NEAR(nt_xent(unit_batch(), config(LossKind::kNtXent)), 0.3133, 1e-4);
}

TEST(NtXent, UniformSimilarityGivesLogK) {
  // Four identical vectors: every anchor sees K = 3 equal candidates.
  const PairBatch b = batch_of({{1, 2}, {1, 2}, {1, 2}, {1, 2}}, {S, S, A, A}, {"c", "c", "c", "c"});
  EXPECT_NEAR(nt_xent(b, config(LossKind::kNtXent, 0.37)), std::log(3.0), 1e-12);
}

TEST(NtXent, LowerTemperatureSharpens) {
  const PairBatch b = batch_of({{1, 0}, {0.9, 0.1}, {0.2, 1}}, {S, S, A}, {"c", "c", "c"});
  EXPECT_LT(nt_xent(b, config(LossKind::kNtXent, 0.1)), nt_xent(b, config(LossKind::kNtXent, 1.0)));
}

TEST(NtXent, Errors) {
  EXPECT_EQ(code_of([] {
              nt_xent(batch_of({{1, 0}, {0, 1}}, {S, A}, {"c", "c"}), config(LossKind::kNtXent));
            }),
            ErrorCode::kNoPositivePair);
  EXPECT_EQ(code_of([] {
              nt_xent(batch_of({{1, 0}, {0, 1}}, {S, S}, {"c", "c"}), config(LossKind::kNtXent));
            }),
            ErrorCode::kNoNegativePair);
  EXPECT_EQ(code_of([] { nt_xent(unit_batch(), config(LossKind::kNtXent, 0.0)); }),
            ErrorCode::kIncompatibleLossConfig);
}

TEST(NtbXent, ClosedForm) {
  EXPECT_NEAR(ntb_xent(unit_batch(), config(LossKind::kNtbXent)), 0.6265, 1e-4);
  EXPECT_NEAR(ntb_xent(unit_batch(), config(LossKind::kNtbXent)), 2.0 * std::log1p(std::exp(-1.0)), 1e-12);
}

TEST(NtbXent, SaturatesAtLowTemperature) {
  // Perfect positive and opposite negative: both terms vanish as tau -> 0.
  const PairBatch b = batch_of({{1, 0}, {1, 0}, {-1, 0}}, {S, S, A}, {"c", "c", "c"});
  EXPECT_LT(ntb_xent(b, config(LossKind::kNtbXent, 0.01)), 1e-40);
}

TEST(NtbXent, ClassMeansNotPooled) {
  // One positive and two negatives in context c; row 3 sits alone in context d.
  const PairBatch b = batch_of({{1, 0}, {0.6, 0.8}, {0, 1}, {0, 1}}, {S, S, A, A}, {"c", "c", "c", "d"});
  const Eigen::MatrixXd s = similarity_matrix(b);
  auto sp = [](double x) { return std::log1p(std::exp(-x)); };
  const double pos_mean = sp(s(0, 1));
  const double neg_mean = (sp(1.0 - s(0, 2)) + sp(1.0 - s(1, 2))) / 2.0;
  EXPECT_NEAR(ntb_xent(b, config(LossKind::kNtbXent)), pos_mean + neg_mean, 1e-12);
  const double pooled = (sp(s(0, 1)) + sp(1.0 - s(0, 2)) + sp(1.0 - s(1, 2))) / 3.0;
  EXPECT_GT(std::abs(ntb_xent(b, config(LossKind::kNtbXent)) - pooled), 0.1);
}

TEST(NtbXent, Errors) {
  EXPECT_EQ(code_of([] {
              ntb_xent(batch_of({{1, 0}, {0, 1}}, {S, A}, {"c", "c"}), config(LossKind::kNtbXent));
            }),
            ErrorCode::kNoPositivePair);
  EXPECT_EQ(code_of([] {
              ntb_xent(batch_of({{1, 0}, {0, 1}, {1, 1}}, {S, S, A}, {"c", "c", "d"}),
                       config(LossKind::kNtbXent));
            }),
            ErrorCode::kNoNegativePair);
}

TEST(Pairwise, Examples) {
  EXPECT_DOUBLE_EQ(pairwise(batch_of({{1, 0}, {2, 0}}, {S, S}, {"c", "c"}), config(LossKind::kPairwise)), 0.0);
  const double s03 = std::sqrt(1.0 - 0.09);
  EXPECT_DOUBLE_EQ(
      pairwise(batch_of({{1, 0}, {0.3, s03}}, {S, A}, {"c", "c"}), config(LossKind::kPairwise, 1.0, 0.5)), 0.0);
  EXPECT_NEAR(pairwise(batch_of({{1, 0}, {1, 0}}, {S, A}, {"c", "c"}), config(LossKind::kPairwise, 1.0, 0.5)),
              0.5, 1e-12);
  EXPECT_EQ(code_of([] {
              pairwise(batch_of({{1, 0}, {0, 1}}, {S, A}, {"c", "d"}), config(LossKind::kPairwise));
            }),
            ErrorCode::kNoLabeledPairs);
  EXPECT_EQ(code_of([] { pairwise(unit_batch(), config(LossKind::kPairwise, 1.0, 1.0)); }),
            ErrorCode::kIncompatibleLossConfig);
}

TEST(Triplet, Examples) {
  // Anchor 0 with positive 1 (S=1) and negative 2 (S=0).
  EXPECT_DOUBLE_EQ(triplet(unit_batch(), config(LossKind::kTriplet, 1.0, 0.5)), 0.0);
  // Everything identical: S_ij = S_kl.
  EXPECT_NEAR(triplet(batch_of({{1, 1}, {1, 1}, {1, 1}}, {S, S, A}, {"c", "c", "c"}),
                      config(LossKind::kTriplet, 1.0, 0.5)),
              0.5, 1e-12);
  // Anchor 0: S(a,p) = 0.2, S(a,q) = 0.9, hinge 1.0. Anchor 1 clears its
  // margin, and the inactive triplet still counts in the mean.
  const PairBatch b = batch_of({{1, 0, 0}, {0.2, std::sqrt(0.96), 0}, {0.9, -0.4, std::sqrt(0.03)}}, {S, S, A},
                               {"c", "c", "c"});
  EXPECT_NEAR(triplet(b, config(LossKind::kTriplet, 1.0, 0.3)), 0.5, 1e-12);
  EXPECT_EQ(code_of([] {
              triplet(batch_of({{1, 0}, {0, 1}}, {S, A}, {"c", "c"}), config(LossKind::kTriplet));
            }),
            ErrorCode::kNoTripletConstructible);
}

// Random batch: two contexts of three, each with both labels.
PairBatch random_batch(std::mt19937_64& rng, Eigen::Index dim = 8) {
  std::normal_distribution<double> n;
  PairBatch b;
  b.embeddings = Eigen::MatrixXd::NullaryExpr(6, dim, [&] { return n(rng); });
  b.labels = {S, S, A, A, A, S};
  b.context_ids = {"c", "c", "c", "d", "d", "d"};
  return b;
}

const LossKind kAllKinds[] = {LossKind::kNtXent, LossKind::kNtbXent, LossKind::kPairwise, LossKind::kTriplet};

TEST(LossProperties, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(17);
  for (LossKind kind : kAllKinds) {
    const LossConfig cfg = config(kind, 0.5, 0.3);
    for (int trial = 0; trial < 10; ++trial) {
      PairBatch b = random_batch(rng);
      const Eigen::MatrixXd analytic = compute_loss(b, cfg, true).gradient;
      Eigen::MatrixXd numeric(b.embeddings.rows(), b.embeddings.cols());
      const double eps = 1e-4;
      for (Eigen::Index k = 0; k < b.embeddings.size(); ++k) {
        const double keep = b.embeddings(k);
        b.embeddings(k) = keep + eps;
        const double up = compute_loss(b, cfg, false).value;
        b.embeddings(k) = keep - eps;
        const double down = compute_loss(b, cfg, false).value;
        b.embeddings(k) = keep;
        numeric(k) = (up - down) / (2 * eps);
      }
      const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
      EXPECT_LT((analytic - numeric).norm() / scale, 1e-3) << to_string(kind) << " trial " << trial;
    }
  }
}

TEST(LossProperties, NonNegativeAndPermutationInvariant) {
  std::mt19937_64 rng(23);
  for (LossKind kind : kAllKinds) {
    for (int trial = 0; trial < 30; ++trial) {
      const PairBatch b = random_batch(rng);
      const double value = compute_loss(b, config(kind, 0.2, 0.4), false).value;
      EXPECT_GE(value, 0.0);

      std::vector<int> order(6);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      PairBatch p = b;
      for (int i = 0; i < 6; ++i) {
        p.embeddings.row(i) = b.embeddings.row(order[static_cast<std::size_t>(i)]);
        p.labels[static_cast<std::size_t>(i)] = b.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        p.context_ids[static_cast<std::size_t>(i)] =
            b.context_ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      }
      EXPECT_NEAR(compute_loss(p, config(kind, 0.2, 0.4), false).value, value, 1e-6) << to_string(kind);
    }
  }
}

// Rows 0 and 1 live in span(e0, e1); the anti rows live in span(e2, e3), so
// rotating row 1 toward row 0 changes S_01 and nothing else.
TEST(LossProperties, RaisingPositiveSimilarityNeverIncreasesLoss) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n;
  for (LossKind kind : {LossKind::kNtXent, LossKind::kNtbXent}) {
    for (int trial = 0; trial < 50; ++trial) {
      PairBatch b;
      b.embeddings = Eigen::MatrixXd::Zero(4, 4);
      b.embeddings(0, 0) = 1.0;
      b.embeddings.block(2, 2, 2, 2) = Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return n(rng); });
      b.labels = {S, S, A, A};
      b.context_ids = {"c", "c", "c", "c"};
      double previous = std::numeric_limits<double>::infinity();
      for (int step = 0; step <= 20; ++step) {
        const double theta = M_PI * (1.0 - step / 20.0);
        b.embeddings(1, 0) = std::cos(theta);
        b.embeddings(1, 1) = std::sin(theta);
        const double current = compute_loss(b, config(kind, 0.5), false).value;
        EXPECT_LE(current, previous + 1e-12) << to_string(kind) << " trial " << trial << " step " << step;
        previous = current;
      }
    }
  }
}

// Direct check on the similarity-level NT-Xent: raise S_01 with all other
// entries fixed.
TEST(LossProperties, NtXentMonotoneInPositiveSimilarity) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BoolMatrix pos = BoolMatrix::Constant(4, 4, false);
  pos(0, 1) = pos(1, 0) = true;
  BoolMatrix candidates = BoolMatrix::Constant(4, 4, true);
  for (int i = 0; i < 4; ++i) candidates(i, i) = false;
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(4, 4);
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j) s(i, j) = s(j, i) = u(rng);
    }
    double previous = nt_xent_from_similarity(s, pos, candidates, 0.3);
    for (double v = s(0, 1) + 0.05; v <= 1.0; v += 0.05) {
      s(0, 1) = s(1, 0) = v;
      const double current = nt_xent_from_similarity(s, pos, candidates, 0.3);
      EXPECT_LE(current, previous + 1e-12);
      previous = current;
    }
  }
}

TEST(LossProperties, MarginLossesZeroWhenSatisfied) {
  // Positives identical, negatives orthogonal: S_pos = 1, S_neg = 0 < m.
  const PairBatch b = batch_of({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 1, 0}}, {S, S, A, A}, {"c", "c", "c", "c"});
  EXPECT_DOUBLE_EQ(pairwise(b, config(LossKind::kPairwise, 1.0, 0.4)), 0.0);
  EXPECT_DOUBLE_EQ(triplet(b, config(LossKind::kTriplet, 1.0, 0.4)), 0.0);
  const LossOutput g = compute_loss(b, config(LossKind::kTriplet, 1.0, 0.4), true);
  EXPECT_DOUBLE_EQ(g.gradient.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossKinds, ParseAndPrint) {
  for (LossKind kind : kAllKinds) EXPECT_EQ(parse_loss_kind(to_string(kind)), kind);
  EXPECT_EQ(code_of([] { parse_loss_kind("infonce"); }), ErrorCode::kInvalidArgument);
  EXPECT_TRUE(uses_temperature(LossKind::kNtXent));
  EXPECT_FALSE(uses_temperature(LossKind::kTriplet));
}

}  // namespace
}  // namespace contrabias
