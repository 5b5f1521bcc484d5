#include <gtest/gtest.h>

#include <cmath>

#include "contrabias/embedder.hpp"
#include "contrabias/error.hpp"
#include "test_support.hpp"

namespace contrabias {
namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::kInvalidArgument;
}

EncoderHandle stub(int dim = 8, std::uint64_t seed = 42) {
  EncoderSpec spec;
  spec.backend_id = "stub";
  spec.dimension = dim;
  spec.seed = seed;
  return make_encoder(spec);
}

TEST(Tokenize, LowercasesAndSplits) {
  EXPECT_EQ(tokenize("Hello, hello WORLD"), (std::vector<std::string>{"hello", "hello", "world"}));
  EXPECT_EQ(tokenize("<MASK> it's"), (std::vector<std::string>{"mask", "it", "s"}));
  EXPECT_TRUE(tokenize(" ,.;! ").empty());
  EXPECT_EQ(tokenize("d\xc3\xa9j\xc3\xa0 vu").size(), 2u);
}

// Values produced by tests/oracles/stub_vectors.py.
TEST(StubEncoder, MatchesIndependentOracle) {
  const std::vector<std::string> texts = {"The Dalit family lived in a small hut.", "caste",
                                          "Hello, hello WORLD"};
  const double expected[3][8] = {
      {-0.54573352139802089, 0.27595697127948937, -0.011583142815730136, -0.091735649857949894,
       -0.085066933600427136, -0.67900640742045104, -0.32020416969145638, -0.21600064855091292},
      {0.53320674862195427, -0.044030235697728473, 0.18101904508799574, -0.26216465506301823,
       -0.43755213287706207, 0.058002640823249969, -0.39986429856484729, -0.50748996829989745},
      {0.038250829720038522, -0.16042616087512915, 0.33501210436658624, -0.12985830994010328,
       -0.6143106061679221, 0.19930397065066854, 0.53826053361902126, -0.36997301871975941}};
  const Eigen::MatrixXd m = embed_matrix(stub(), texts);
  for (int i = 0; i < 3; ++i) {
    for (int d = 0; d < 8; ++d) EXPECT_NEAR(m(i, d), expected[i][d], 1e-12) << i << "," << d;
  }
}

TEST(Embed, DefaultsTo384AndUnitNorm) {
  const EncoderHandle h = make_encoder({});
  EXPECT_EQ(h.backend_id(), "hashed-token");
  EXPECT_EQ(h.dimension(), 384);
  EXPECT_FALSE(h.trainable());
  const std::vector<std::string> texts = {"one sentence", "another, longer sentence here"};
  for (const auto& e : embed(h, texts)) {
    EXPECT_EQ(e.values.size(), 384);
    EXPECT_NEAR(e.values.norm(), 1.0, 1e-12);
  }
}

TEST(Embed, DeterministicAndBatchIndependent) {
  for (const char* backend : {"stub", "hashed-token"}) {
    EncoderSpec spec;
    spec.backend_id = backend;
    spec.dimension = 32;
    spec.seed = 5;
    const EncoderHandle a = make_encoder(spec);
    const EncoderHandle b = make_encoder(spec);
    const std::vector<std::string> batch = {"first text", "second text", "third one"};
    const Eigen::MatrixXd all = embed_matrix(a, batch);
    EXPECT_TRUE(all.isApprox(embed_matrix(b, batch), 0.0)) << backend;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const std::vector<std::string> single = {batch[i]};
      const Eigen::MatrixXd one = embed_matrix(a, single);
      EXPECT_LT((one.row(0) - all.row(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(Embed, HashRecordedPerText) {
  const std::vector<std::string> texts = {"a b", "a b", "b c"};
  const auto out = embed(stub(), texts);
  EXPECT_EQ(out[0].source_text_hash, out[1].source_text_hash);
  EXPECT_NE(out[0].source_text_hash, out[2].source_text_hash);
}

TEST(Embed, Errors) {
  EXPECT_EQ(code_of([] {
              const std::vector<std::string> t = {"..."};
              embed(stub(), t);
            }),
            ErrorCode::kTokenizationFailure);
  EXPECT_EQ(code_of([] {
              const std::vector<std::string> t;
              embed(stub(), t);
            }),
            ErrorCode::kInvalidArgument);
  for (const char* id : {"all-MiniLM-L6-v2", "bert-base-uncased", "modernbert", "nope"}) {
    EXPECT_EQ(code_of([&] {
                EncoderSpec spec;
                spec.backend_id = id;
                make_encoder(spec);
              }),
              ErrorCode::kBackendUnavailable)
        << id;
  }
}

TEST(Cosine, Examples) {
  Eigen::VectorXd a(2), b(2), c(2), z(2), d(3);
  a << 1, 0;
  b << 1, 1;
  c << -2, 0;
  z << 0, 0;
  d << 1, 0, 0;
  EXPECT_NEAR(cosine(a, b), 0.70710678118654752, 1e-15);
  EXPECT_NEAR(cosine(a, c), -1.0, 1e-15);
  EXPECT_NEAR(cosine(a, a), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(cosine(a, b), cosine(b, a));
  EXPECT_EQ(code_of([&] { cosine(a, z); }), ErrorCode::kZeroVector);
  EXPECT_EQ(code_of([&] { cosine(a, d); }), ErrorCode::kDimensionMismatch);
}

TEST(Cosine, ScaleInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd u(16), v(16);
    for (int i = 0; i < 16; ++i) {
      u[i] = n(rng);
      v[i] = n(rng);
    }
    const double c = cosine(u, v);
    EXPECT_LE(std::abs(c), 1.0 + 1e-12);
    EXPECT_NEAR(cosine(u * 3.7, v * 0.01), c, 1e-12);
  }
}

TEST(Trainable, FlagSemantics) {
  EXPECT_EQ(code_of([] { set_trainable(stub(), true); }), ErrorCode::kUnsupportedForBackend);
  EXPECT_FALSE(set_trainable(stub(), false).trainable());

  EncoderSpec spec;
  spec.dimension = 16;
  spec.buckets = 64;
  const EncoderHandle frozen = make_encoder(spec);
  const EncoderHandle unfrozen = set_trainable(frozen, true);
  EXPECT_TRUE(unfrozen.trainable());
  EXPECT_FALSE(frozen.trainable());
  // Handles share weights; clone() detaches.
  EXPECT_EQ(&frozen.backend(), &unfrozen.backend());
  const EncoderHandle copy = frozen.clone();
  EXPECT_NE(&copy.backend(), &frozen.backend());
  EXPECT_TRUE(copy.backend().parameters().isApprox(frozen.backend().parameters(), 0.0));
}

TEST(HashedToken, BackwardMatchesFiniteDifference) {
  for (Pooling pooling : {Pooling::kMean, Pooling::kFirstToken}) {
    HashedTokenConfig cfg;
    cfg.dimension = 6;
    cfg.buckets = 32;
    cfg.seed = 11;
    HashedTokenEncoder enc(cfg);
    const std::vector<std::string> texts = {"the quick brown fox", "a lazy dog sleeps", "fox"};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    Eigen::MatrixXd upstream(3, 6);
    for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream(i) = n(rng);

    std::unique_ptr<ForwardTape> tape;
    enc.forward(texts, pooling, tape);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(enc.parameters().size());
    enc.backward(*tape, upstream, grad);

    auto objective = [&] {
      return (enc.encode(texts, pooling).array() * upstream.array()).sum();
    };
    const double eps = 1e-6;
    int checked = 0;
    for (Eigen::Index p = 0; p < enc.parameters().size(); ++p) {
      if (grad[p] == 0.0 && p % 7 != 0) continue;
      const double keep = enc.parameters()[p];
      enc.parameters()[p] = keep + eps;
      const double up = objective();
      enc.parameters()[p] = keep - eps;
      const double down = objective();
      enc.parameters()[p] = keep;
      const double numeric = (up - down) / (2 * eps);
      EXPECT_NEAR(grad[p], numeric, 1e-6 + 1e-5 * std::abs(numeric)) << "param " << p;
      ++checked;
    }
    EXPECT_GT(checked, 20);
  }
}

TEST(HashedToken, ForwardEqualsEncode) {
  HashedTokenEncoder enc({16, 128, true, 2});
  const std::vector<std::string> texts = {"alpha beta gamma", "delta"};
  std::unique_ptr<ForwardTape> tape;
  EXPECT_TRUE(enc.forward(texts, Pooling::kMean, tape).isApprox(enc.encode(texts, Pooling::kMean)));
  EXPECT_FALSE(enc.encode(texts, Pooling::kMean).isApprox(enc.encode(texts, Pooling::kFirstToken)));
}

TEST(Checkpoint, RoundTripReproducesEmbeddings) {
  const auto dir = testing::scratch_dir("embedder_ckpt");
  EncoderSpec spec;
  spec.dimension = 24;
  spec.buckets = 256;
  spec.seed = 9;
  spec.pooling = Pooling::kFirstToken;
  EncoderHandle h = make_encoder(spec);
  h.backend().parameters()[3] += 0.25;  // not reproducible from the seed alone
  save_checkpoint(h, dir / "ckpt", {{"loss", "ntb_xent"}});
  const EncoderHandle back = load_checkpoint(dir / "ckpt");
  EXPECT_EQ(back.pooling(), Pooling::kFirstToken);
  const std::vector<std::string> texts = {"checkpoint fidelity", "second"};
  EXPECT_LT((embed_matrix(h, texts) - embed_matrix(back, texts)).cwiseAbs().maxCoeff(), 1e-15);

  save_checkpoint(stub(), dir / "stub");
  EXPECT_TRUE(embed_matrix(load_checkpoint(dir / "stub"), texts).isApprox(embed_matrix(stub(), texts)));
  EXPECT_EQ(code_of([&] { load_checkpoint(dir / "missing"); }), ErrorCode::kIoError);
}

}  // namespace
}  // namespace contrabias
