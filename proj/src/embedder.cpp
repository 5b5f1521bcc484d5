#include "contrabias/embedder.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include "contrabias/error.hpp"
#include "contrabias/random.hpp"

namespace contrabias {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using nlohmann::json;

constexpr std::array<const char*, 3> kTransformerIds = {"all-MiniLM-L6-v2", "bert-base-uncased",
                                                        "modernbert"};
constexpr char kWeightsMagic[4] = {'C', 'B', 'W', '1'};

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

double row_norm_or_throw(const Eigen::Ref<const Eigen::VectorXd>& row) {
  const double norm = row.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw Error(ErrorCode::kZeroVector, "encoder produced a zero or non-finite vector");
  }
  return norm;
}

struct HashedTape final : ForwardTape {
  std::vector<std::vector<int>> ids;
  Pooling pooling = Pooling::kMean;
  RowMatrix pooled;
  RowMatrix hidden;
  Eigen::VectorXd norms;
  RowMatrix output;
};

}  // namespace

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::kMean ? "mean" : "first_token";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "mean") return Pooling::kMean;
  if (text == "first_token" || text == "first-token" || text == "cls") return Pooling::kFirstToken;
  throw Error(ErrorCode::kInvalidArgument, "unknown pooling '" + std::string(text) + "'");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// --- EncoderBackend defaults ------------------------------------------------

Eigen::MatrixXd EncoderBackend::forward(std::span<const std::string>, Pooling,
                                        std::unique_ptr<ForwardTape>&) const {
  throw Error(ErrorCode::kUnsupportedForBackend, backend_id() + " does not support training");
}

void EncoderBackend::backward(const ForwardTape&, const Eigen::MatrixXd&,
                              Eigen::VectorXd&) const {
  throw Error(ErrorCode::kUnsupportedForBackend, backend_id() + " does not support training");
}

Eigen::VectorXd& EncoderBackend::parameters() {
  throw Error(ErrorCode::kUnsupportedForBackend, backend_id() + " has no trainable parameters");
}

const Eigen::VectorXd& EncoderBackend::parameters() const {
  throw Error(ErrorCode::kUnsupportedForBackend, backend_id() + " has no trainable parameters");
}

// --- StubEncoder -----------------------------------------------------------

StubEncoder::StubEncoder(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension < 1) throw Error(ErrorCode::kInvalidArgument, "dimension must be positive");
}

std::unique_ptr<EncoderBackend> StubEncoder::clone() const {
  return std::make_unique<StubEncoder>(*this);
}

Eigen::MatrixXd StubEncoder::encode(std::span<const std::string> texts, Pooling) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(texts.size()), dimension_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto tokens = tokenize(texts[i]);
    if (tokens.empty()) {
      throw Error(ErrorCode::kTokenizationFailure, "no tokens in \"" + texts[i] + "\"");
    }
    for (const std::string& token : tokens) {
      std::uint64_t state = fnv1a64(token) ^ (seed_ * 0x9E3779B97F4A7C15ULL);
      for (int d = 0; d < dimension_; ++d) {
        const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
        out(static_cast<Eigen::Index>(i), d) += 2.0 * u - 1.0;
      }
    }
    const auto row = out.row(static_cast<Eigen::Index>(i));
    out.row(static_cast<Eigen::Index>(i)) /= row_norm_or_throw(row.transpose());
  }
  return out;
}

json StubEncoder::manifest() const {
  return {{"backend_id", backend_id()}, {"dimension", dimension_}, {"seed", seed_}};
}

// --- HashedTokenEncoder ------------------------------------------------------

HashedTokenEncoder::HashedTokenEncoder(const HashedTokenConfig& config) : config_(config) {
  if (config.dimension < 1 || config.buckets < 1) {
    throw Error(ErrorCode::kInvalidArgument, "dimension and buckets must be positive");
  }
  const Eigen::Index d = config.dimension;
  params_.resize(static_cast<Eigen::Index>(config.buckets) * d + d * d + d);
  Rng rng(config.seed ^ 0x5EEDC0DEULL);
  const double table_scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (Eigen::Index i = 0; i < weight_offset(); ++i) params_[i] = table_scale * rng.normal();
  Eigen::Map<RowMatrix> w(params_.data() + weight_offset(), d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      w(r, c) = (r == c ? 1.0 : 0.0) + 0.01 * table_scale * rng.normal();
    }
  }
  params_.segment(bias_offset(), d).setZero();
}

Eigen::Index HashedTokenEncoder::weight_offset() const {
  return static_cast<Eigen::Index>(config_.buckets) * config_.dimension;
}

Eigen::Index HashedTokenEncoder::bias_offset() const {
  return weight_offset() + static_cast<Eigen::Index>(config_.dimension) * config_.dimension;
}

std::unique_ptr<EncoderBackend> HashedTokenEncoder::clone() const {
  return std::make_unique<HashedTokenEncoder>(*this);
}

std::vector<int> HashedTokenEncoder::token_ids(std::string_view text) const {
  const auto tokens = tokenize(text);
  std::vector<int> ids;
  ids.reserve(tokens.size() * 2);
  const auto bucket = [this](std::string_view key) {
    return static_cast<int>(fnv1a64(key) % static_cast<std::uint64_t>(config_.buckets));
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ids.push_back(bucket("u:" + tokens[i]));
  }
  if (config_.bigrams) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      ids.push_back(bucket("b:" + tokens[i] + ' ' + tokens[i + 1]));
    }
  }
  return ids;
}

Eigen::MatrixXd HashedTokenEncoder::forward(std::span<const std::string> texts, Pooling pooling,
                                            std::unique_ptr<ForwardTape>& tape_out) const {
  const Eigen::Index n = static_cast<Eigen::Index>(texts.size());
  const Eigen::Index d = config_.dimension;
  auto tape = std::make_unique<HashedTape>();
  tape->pooling = pooling;
  tape->ids.reserve(texts.size());
  tape->pooled = RowMatrix::Zero(n, d);

  Eigen::Map<const RowMatrix> table(params_.data(), config_.buckets, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto ids = token_ids(texts[static_cast<std::size_t>(i)]);
    if (ids.empty()) {
      throw Error(ErrorCode::kTokenizationFailure,
                  "no tokens in \"" + texts[static_cast<std::size_t>(i)] + "\"");
    }
    if (pooling == Pooling::kFirstToken) {
      tape->pooled.row(i) = table.row(ids.front());
    } else {
      for (int id : ids) tape->pooled.row(i) += table.row(id);
      tape->pooled.row(i) /= static_cast<double>(ids.size());
    }
    tape->ids.push_back(std::move(ids));
  }

  Eigen::Map<const RowMatrix> w(params_.data() + weight_offset(), d, d);
  const auto b = params_.segment(bias_offset(), d);
  tape->hidden = ((tape->pooled * w.transpose()).rowwise() + b.transpose()).array().tanh();
  tape->norms.resize(n);
  tape->output.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    tape->norms[i] = row_norm_or_throw(tape->hidden.row(i).transpose());
    tape->output.row(i) = tape->hidden.row(i) / tape->norms[i];
  }
  Eigen::MatrixXd out = tape->output;
  tape_out = std::move(tape);
  return out;
}

Eigen::MatrixXd HashedTokenEncoder::encode(std::span<const std::string> texts,
                                           Pooling pooling) const {
  std::unique_ptr<ForwardTape> tape;
  return forward(texts, pooling, tape);
}

void HashedTokenEncoder::backward(const ForwardTape& tape_base,
                                  const Eigen::MatrixXd& grad_embeddings,
                                  Eigen::VectorXd& grad) const {
  const auto& tape = dynamic_cast<const HashedTape&>(tape_base);
  const Eigen::Index n = tape.output.rows();
  const Eigen::Index d = config_.dimension;
  if (grad_embeddings.rows() != n || grad_embeddings.cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient shape does not match forward pass");
  }
  if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());

  // Through the normalization: dL/dh = (g - y (y.g)) / |h|.
  RowMatrix grad_hidden(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = tape.output.row(i);
    const auto g = grad_embeddings.row(i);
    grad_hidden.row(i) = (g - y * y.dot(g)) / tape.norms[i];
  }
  const RowMatrix grad_pre = grad_hidden.array() * (1.0 - tape.hidden.array().square());

  Eigen::Map<RowMatrix> grad_w(grad.data() + weight_offset(), d, d);
  grad_w.noalias() += grad_pre.transpose() * tape.pooled;
  grad.segment(bias_offset(), d) += grad_pre.colwise().sum().transpose();

  Eigen::Map<const RowMatrix> w(params_.data() + weight_offset(), d, d);
  const RowMatrix grad_pooled = grad_pre * w;
  Eigen::Map<RowMatrix> grad_table(grad.data(), config_.buckets, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ids = tape.ids[static_cast<std::size_t>(i)];
    if (tape.pooling == Pooling::kFirstToken) {
      grad_table.row(ids.front()) += grad_pooled.row(i);
    } else {
      const double share = 1.0 / static_cast<double>(ids.size());
      for (int id : ids) grad_table.row(id) += share * grad_pooled.row(i);
    }
  }
}

json HashedTokenEncoder::manifest() const {
  return {{"backend_id", backend_id()},
          {"dimension", config_.dimension},
          {"buckets", config_.buckets},
          {"bigrams", config_.bigrams},
          {"seed", config_.seed}};
}

// --- Handle & free functions -------------------------------------------------

EncoderHandle::EncoderHandle(std::shared_ptr<EncoderBackend> backend, Pooling pooling,
                             bool trainable)
    : backend_(std::move(backend)), pooling_(pooling), trainable_(trainable) {
  if (!backend_) throw Error(ErrorCode::kInvalidArgument, "null encoder backend");
  if (trainable_ && !backend_->supports_training()) {
    throw Error(ErrorCode::kUnsupportedForBackend,
                backend_->backend_id() + " does not support gradient updates");
  }
}

EncoderHandle EncoderHandle::clone() const {
  return EncoderHandle(std::shared_ptr<EncoderBackend>(backend_->clone()), pooling_, trainable_);
}

EncoderHandle make_encoder(const EncoderSpec& spec) {
  std::shared_ptr<EncoderBackend> backend;
  if (spec.backend_id == "stub") {
    backend = std::make_shared<StubEncoder>(spec.dimension, spec.seed);
  } else if (spec.backend_id == "hashed-token" || spec.backend_id == "default") {
    backend = std::make_shared<HashedTokenEncoder>(
        HashedTokenConfig{spec.dimension, spec.buckets, spec.bigrams, spec.seed});
  } else {
    for (const char* id : kTransformerIds) {
      if (spec.backend_id == id) {
        throw Error(ErrorCode::kBackendUnavailable,
                    spec.backend_id + ": pretrained transformer weights are not bundled with "
                                      "this build; use 'hashed-token' or 'stub'");
      }
    }
    throw Error(ErrorCode::kBackendUnavailable, "unknown backend '" + spec.backend_id + "'");
  }
  return EncoderHandle(std::move(backend), spec.pooling, spec.trainable);
}

Eigen::MatrixXd embed_matrix(const EncoderHandle& handle, std::span<const std::string> texts) {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed() needs at least one text");
  return handle.backend().encode(texts, handle.pooling());
}

std::vector<EmbeddingVector> embed(const EncoderHandle& handle,
                                   std::span<const std::string> texts) {
  const Eigen::MatrixXd m = embed_matrix(handle, texts);
  std::vector<EmbeddingVector> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out[i].values = m.row(static_cast<Eigen::Index>(i)).transpose();
    out[i].source_text_hash = fnv1a64(texts[i]);
  }
  return out;
}

double cosine(const Eigen::Ref<const Eigen::VectorXd>& a,
              const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return cosine(a.values, b.values);
}

EncoderHandle set_trainable(const EncoderHandle& handle, bool flag) {
  return handle.with_trainable(flag);
}

EncoderHandle EncoderHandle::with_trainable(bool flag) const {
  return EncoderHandle(backend_, pooling_, flag);
}

void save_checkpoint(const EncoderHandle& handle, const std::filesystem::path& dir,
                     const json& extra) {
  std::filesystem::create_directories(dir);
  json manifest = handle.backend().manifest();
  manifest["pooling"] = to_string(handle.pooling());
  if (!extra.is_null()) manifest["training"] = extra;
  if (handle.backend().supports_training()) {
    const Eigen::VectorXd& params = handle.backend().parameters();
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + (dir / "weights.bin").string());
    const std::uint64_t count = static_cast<std::uint64_t>(params.size());
    out.write(kWeightsMagic, sizeof(kWeightsMagic));
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    out.write(reinterpret_cast<const char*>(params.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
    manifest["weights"] = "weights.bin";
  }
  std::ofstream mout(dir / "manifest.json");
  if (!mout) throw Error(ErrorCode::kIoError, "cannot write " + (dir / "manifest.json").string());
  mout << manifest.dump(2) << '\n';
}

EncoderHandle load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw Error(ErrorCode::kIoError, "missing " + (dir / "manifest.json").string());
  const json manifest = json::parse(min);
  EncoderSpec spec;
  spec.backend_id = manifest.at("backend_id").get<std::string>();
  spec.dimension = manifest.at("dimension").get<int>();
  spec.seed = manifest.value("seed", std::uint64_t{0});
  spec.buckets = manifest.value("buckets", spec.buckets);
  spec.bigrams = manifest.value("bigrams", spec.bigrams);
  spec.pooling = parse_pooling(manifest.value("pooling", std::string("mean")));
  EncoderHandle handle = make_encoder(spec);
  if (manifest.contains("weights")) {
    const auto path = dir / manifest["weights"].get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
    char magic[4];
    std::uint64_t count = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    Eigen::VectorXd& params = handle.backend().parameters();
    if (!in || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0 ||
        count != static_cast<std::uint64_t>(params.size())) {
      throw Error(ErrorCode::kIoError, path.string() + ": weights do not match manifest");
    }
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw Error(ErrorCode::kIoError, path.string() + ": truncated weights");
  }
  return handle;
}

}  // namespace contrabias
