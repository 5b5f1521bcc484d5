#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace contrabias {

inline constexpr int kDefaultDimension = 384;

enum class Pooling { kMean, kFirstToken };

std::string_view to_string(Pooling pooling);
Pooling parse_pooling(std::string_view text);

// Lowercased alphanumeric runs; bytes >= 0x80 count as word characters so
// UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct EmbeddingVector {
  Eigen::VectorXd values;
  std::uint64_t source_text_hash = 0;
};

// Opaque record of a forward pass, consumed by backward().
struct ForwardTape {
  virtual ~ForwardTape() = default;
};

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::string backend_id() const = 0;
  virtual int dimension() const = 0;
  virtual bool supports_training() const = 0;
  virtual std::unique_ptr<EncoderBackend> clone() const = 0;

  // One L2-normalized row per text.
  virtual Eigen::MatrixXd encode(std::span<const std::string> texts, Pooling pooling) const = 0;

  // Training surface; only meaningful when supports_training().
  virtual Eigen::MatrixXd forward(std::span<const std::string> texts, Pooling pooling,
                                  std::unique_ptr<ForwardTape>& tape) const;
  // Accumulates dLoss/dParams into `grad` (same layout as parameters()).
  virtual void backward(const ForwardTape& tape, const Eigen::MatrixXd& grad_embeddings,
                        Eigen::VectorXd& grad) const;
  virtual Eigen::VectorXd& parameters();
  virtual const Eigen::VectorXd& parameters() const;

  virtual nlohmann::json manifest() const = 0;
};

// Seeded pseudo-random projection of a token-hash bag. Token t contributes
// the vector v_d = 2 * u_d - 1, where u_d are successive splitmix64 draws
// (top 53 bits scaled to [0,1)) from the state
// fnv1a64(t) ^ (seed * 0x9E3779B97F4A7C15). Contributions are summed with
// multiplicity and the result is unit-normalized. Not trainable.
class StubEncoder final : public EncoderBackend {
 public:
  explicit StubEncoder(int dimension = kDefaultDimension, std::uint64_t seed = 0);

  std::string backend_id() const override { return "stub"; }
  int dimension() const override { return dimension_; }
  bool supports_training() const override { return false; }
  std::unique_ptr<EncoderBackend> clone() const override;
  Eigen::MatrixXd encode(std::span<const std::string> texts, Pooling pooling) const override;
  nlohmann::json manifest() const override;

  std::uint64_t seed() const { return seed_; }

 private:
  int dimension_;
  std::uint64_t seed_;
};

struct HashedTokenConfig {
  int dimension = kDefaultDimension;
  int buckets = 8192;
  bool bigrams = true;
  std::uint64_t seed = 0;
};

// Trainable bag-of-hashed-tokens encoder:
//   p = pool(E[token ids]);  h = tanh(W p + b);  out = h / |h|
// E is buckets x D, W is D x D (initialized near identity).
class HashedTokenEncoder final : public EncoderBackend {
 public:
  explicit HashedTokenEncoder(const HashedTokenConfig& config = {});

  std::string backend_id() const override { return "hashed-token"; }
  int dimension() const override { return config_.dimension; }
  bool supports_training() const override { return true; }
  std::unique_ptr<EncoderBackend> clone() const override;
  Eigen::MatrixXd encode(std::span<const std::string> texts, Pooling pooling) const override;
  Eigen::MatrixXd forward(std::span<const std::string> texts, Pooling pooling,
                          std::unique_ptr<ForwardTape>& tape) const override;
  void backward(const ForwardTape& tape, const Eigen::MatrixXd& grad_embeddings,
                Eigen::VectorXd& grad) const override;
  Eigen::VectorXd& parameters() override { return params_; }
  const Eigen::VectorXd& parameters() const override { return params_; }
  nlohmann::json manifest() const override;

  const HashedTokenConfig& config() const { return config_; }
  std::vector<int> token_ids(std::string_view text) const;

 private:
  Eigen::Index table_offset() const { return 0; }
  Eigen::Index weight_offset() const;
  Eigen::Index bias_offset() const;

  HashedTokenConfig config_;
  Eigen::VectorXd params_;
};

// A view onto a backend plus the pooling choice and a frozen/unfrozen flag.
// Copies share weights; use clone() for an independent encoder.
class EncoderHandle {
 public:
  EncoderHandle(std::shared_ptr<EncoderBackend> backend, Pooling pooling, bool trainable);

  std::string backend_id() const { return backend_->backend_id(); }
  int dimension() const { return backend_->dimension(); }
  Pooling pooling() const { return pooling_; }
  bool trainable() const { return trainable_; }

  EncoderBackend& backend() { return *backend_; }
  const EncoderBackend& backend() const { return *backend_; }

  EncoderHandle clone() const;
  EncoderHandle with_trainable(bool flag) const;

 private:
  std::shared_ptr<EncoderBackend> backend_;
  Pooling pooling_;
  bool trainable_;
};

struct EncoderSpec {
  std::string backend_id = "hashed-token";
  Pooling pooling = Pooling::kMean;
  int dimension = kDefaultDimension;
  std::uint64_t seed = 0;
  int buckets = 8192;
  bool bigrams = true;
  bool trainable = false;
};

// Registry: "hashed-token" (default) and "stub". Pretrained transformer ids
// ("all-MiniLM-L6-v2", "bert-base-uncased", "modernbert") are recognized but
// raise BackendUnavailable: no transformer runtime is bundled.
EncoderHandle make_encoder(const EncoderSpec& spec);

std::vector<EmbeddingVector> embed(const EncoderHandle& handle,
                                   std::span<const std::string> texts);
Eigen::MatrixXd embed_matrix(const EncoderHandle& handle, std::span<const std::string> texts);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

EncoderHandle set_trainable(const EncoderHandle& handle, bool flag);

// Checkpoint layout: <dir>/manifest.json plus <dir>/weights.bin for
// trainable backends. `extra` is merged into the manifest (training config).
void save_checkpoint(const EncoderHandle& handle, const std::filesystem::path& dir,
                     const nlohmann::json& extra = {});
EncoderHandle load_checkpoint(const std::filesystem::path& dir);

}  // namespace contrabias
