#include "contrabias/stereo_classifier.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>

#include "contrabias/error.hpp"
#include "contrabias/optim.hpp"
#include "contrabias/random.hpp"

namespace contrabias {

using nlohmann::json;

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double class_f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

struct SampleSet {
  std::vector<std::string> texts;
  Eigen::VectorXd targets;
};

SampleSet collect_samples(const std::vector<ContextGroup>& groups) {
  SampleSet out;
  std::vector<double> targets;
  for (const auto& g : groups) {
    for (const auto* members : {&g.stereotypes, &g.anti_stereotypes}) {
      for (const auto& r : *members) {
        out.texts.push_back(r.text);
        targets.push_back(r.label == Label::kStereotype ? 1.0 : 0.0);
      }
    }
  }
  out.targets = Eigen::Map<Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  return out;
}

double accuracy(const Eigen::VectorXd& logits, const Eigen::VectorXd& targets) {
  if (targets.size() == 0) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    correct += ((logits[i] > 0.0) == (targets[i] > 0.5)) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(targets.size());
}

void check_finite(double loss, int epoch) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kDivergedLoss,
                "head loss became non-finite at epoch " + std::to_string(epoch));
  }
}

// Shared epoch loop. `step` runs one minibatch update and returns its loss;
// `validate` returns (loss, accuracy); `snapshot`/`restore` keep the best state.
template <typename Step, typename Validate, typename Snapshot, typename Restore>
std::vector<HeadEpoch> run_epochs(std::size_t n_train, const HeadTrainConfig& config, Step step,
                                  Validate validate, Snapshot snapshot, Restore restore,
                                  int& best_epoch) {
  std::vector<HeadEpoch> history;
  Rng rng(config.seed ^ 0x4EADu);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto [v_loss, v_acc] = validate();
  history.push_back({0, std::numeric_limits<double>::quiet_NaN(), v_loss, v_acc});
  double best = v_loss;
  best_epoch = 0;
  snapshot();
  int bad = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(config.batch_size));
      std::span<const std::size_t> rows(order.data() + start, end - start);
      const double loss = step(rows);
      check_finite(loss, epoch);
      sum += loss * static_cast<double>(rows.size());
      seen += rows.size();
    }
    std::tie(v_loss, v_acc) = validate();
    check_finite(v_loss, epoch);
    history.push_back({epoch, sum / static_cast<double>(std::max<std::size_t>(seen, 1)), v_loss, v_acc});
    if (v_loss < best) {
      best = v_loss;
      best_epoch = epoch;
      bad = 0;
      snapshot();
    } else if (++bad >= config.patience) {
      break;
    }
  }
  restore();
  return history;
}

}  // namespace

std::string_view to_string(EncoderMode mode) {
  switch (mode) {
    case EncoderMode::kFrozenVanilla: return "frozen_vanilla";
    case EncoderMode::kFrozenContrastive: return "frozen_contrastive";
    case EncoderMode::kUnfrozenVanilla: return "unfrozen_vanilla";
    case EncoderMode::kUnfrozenContrastive: return "unfrozen_contrastive";
  }
  return "frozen_vanilla";
}

EncoderMode parse_encoder_mode(std::string_view text) {
  for (EncoderMode m : {EncoderMode::kFrozenVanilla, EncoderMode::kFrozenContrastive,
                        EncoderMode::kUnfrozenVanilla, EncoderMode::kUnfrozenContrastive}) {
    if (to_string(m) == text) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown encoder mode '" + std::string(text) + "'");
}

bool is_frozen(EncoderMode mode) {
  return mode == EncoderMode::kFrozenVanilla || mode == EncoderMode::kFrozenContrastive;
}

MlpHead::MlpHead(int input_dim, std::uint64_t seed) : input_dim_(input_dim), hidden_dim_(input_dim / 2) {
  if (input_dim < 2) throw Error(ErrorCode::kInvalidArgument, "head input dimension must be >= 2");
  const Eigen::Index d = input_dim_, h = hidden_dim_;
  params_ = Eigen::VectorXd::Zero(h * d + h + h + 1);
  Rng rng(seed ^ 0x4EAD5EEDu);
  const double s1 = std::sqrt(2.0 / static_cast<double>(d));
  for (Eigen::Index i = 0; i < h * d; ++i) params_[i] = s1 * rng.normal();
  const double s2 = std::sqrt(1.0 / static_cast<double>(h));
  for (Eigen::Index i = 0; i < h; ++i) params_[h * d + h + i] = s2 * rng.normal();
}

Eigen::VectorXd MlpHead::logits(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "head expects " + std::to_string(input_dim_) +
                                                   " inputs, got " + std::to_string(x.cols()));
  }
  const Eigen::Index d = input_dim_, h = hidden_dim_;
  Eigen::Map<const RowMajor> w1(params_.data(), h, d);
  Eigen::Map<const Eigen::VectorXd> b1(params_.data() + h * d, h);
  Eigen::Map<const Eigen::VectorXd> w2(params_.data() + h * d + h, h);
  const double b2 = params_[h * d + 2 * h];
  Eigen::MatrixXd hidden = ((x * w1.transpose()).rowwise() + b1.transpose()).cwiseMax(0.0);
  return (hidden * w2).array() + b2;
}

Eigen::VectorXd MlpHead::predict_proba(const Eigen::MatrixXd& x) const {
  return logits(x).unaryExpr([](double z) { return sigmoid(z); });
}

double MlpHead::bce(const Eigen::MatrixXd& x, const Eigen::VectorXd& targets,
                    Eigen::VectorXd* grad_params, Eigen::MatrixXd* grad_inputs) const {
  if (x.rows() != targets.size() || x.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "head batch and targets disagree");
  }
  if (x.cols() != input_dim_) throw Error(ErrorCode::kDimensionMismatch, "head input width");
  const Eigen::Index d = input_dim_, h = hidden_dim_, n = x.rows();
  Eigen::Map<const RowMajor> w1(params_.data(), h, d);
  Eigen::Map<const Eigen::VectorXd> b1(params_.data() + h * d, h);
  Eigen::Map<const Eigen::VectorXd> w2(params_.data() + h * d + h, h);
  const double b2 = params_[h * d + 2 * h];

  const Eigen::MatrixXd z1 = (x * w1.transpose()).rowwise() + b1.transpose();
  const Eigen::MatrixXd hidden = z1.cwiseMax(0.0);
  const Eigen::VectorXd z = (hidden * w2).array() + b2;

  double loss = 0.0;
  Eigen::VectorXd dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    loss += softplus(z[i]) - targets[i] * z[i];
    dz[i] = (sigmoid(z[i]) - targets[i]) / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (!grad_params && !grad_inputs) return loss;

  const Eigen::MatrixXd dz1 = (dz * w2.transpose()).cwiseProduct(
      z1.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  if (grad_params) {
    grad_params->setZero(params_.size());
    Eigen::Map<RowMajor> g_w1(grad_params->data(), h, d);
    g_w1 = dz1.transpose() * x;
    grad_params->segment(h * d, h) = dz1.colwise().sum().transpose();
    grad_params->segment(h * d + h, h) = hidden.transpose() * dz;
    (*grad_params)[h * d + 2 * h] = dz.sum();
  }
  if (grad_inputs) *grad_inputs = dz1 * w1;
  return loss;
}

json MlpHead::to_json() const {
  return {{"input_dim", input_dim_},
          {"hidden_dim", hidden_dim_},
          {"activation", "relu"},
          {"output", "sigmoid"},
          {"parameters", std::vector<double>(params_.data(), params_.data() + params_.size())}};
}

MlpHead MlpHead::from_json(const json& j) {
  MlpHead head;
  head.input_dim_ = j.at("input_dim").get<int>();
  head.hidden_dim_ = j.at("hidden_dim").get<int>();
  const auto values = j.at("parameters").get<std::vector<double>>();
  const std::size_t expected = static_cast<std::size_t>(head.hidden_dim_) *
                                   static_cast<std::size_t>(head.input_dim_) +
                               2 * static_cast<std::size_t>(head.hidden_dim_) + 1;
  if (values.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch, "head checkpoint has " + std::to_string(values.size()) +
                                                   " parameters, expected " + std::to_string(expected));
  }
  head.params_ = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return head;
}

void HeadTrainConfig::validate() const {
  if (learning_rate < 0.0) throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (max_epochs < 1) throw Error(ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
  if (patience < 1) throw Error(ErrorCode::kInvalidArgument, "patience must be >= 1");
}

LabeledSet embed_labeled(const std::vector<ContextGroup>& groups, const EncoderHandle& handle) {
  LabeledSet out;
  SampleSet samples = collect_samples(groups);
  if (samples.texts.empty()) throw Error(ErrorCode::kEmptyCorpus, "no sentences to embed");
  out.embeddings = embed_matrix(handle, samples.texts);
  out.targets = std::move(samples.targets);
  for (const auto& g : groups) {
    out.categories.insert(out.categories.end(), g.size(), g.category);
  }
  return out;
}

HeadTrainResult train_head_on_embeddings(const LabeledSet& train, const LabeledSet& validation,
                                         const HeadTrainConfig& config) {
  config.validate();
  if (train.embeddings.rows() == 0 || validation.embeddings.rows() == 0) {
    throw Error(ErrorCode::kEmptyCorpus, "head training needs train and validation rows");
  }
  HeadTrainResult result;
  result.head = MlpHead(static_cast<int>(train.embeddings.cols()), config.seed);
  AdamW optimizer(result.head.parameters().size(),
                  AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  Eigen::VectorXd best_params;
  Eigen::VectorXd grad;

  result.history = run_epochs(
      static_cast<std::size_t>(train.embeddings.rows()), config,
      [&](std::span<const std::size_t> rows) {
        const double loss = result.head.bce(gather_rows(train.embeddings, rows),
                                            gather(train.targets, rows), &grad);
        clip_global_norm(grad, config.grad_clip_norm);
        optimizer.step(result.head.parameters(), grad);
        return loss;
      },
      [&] {
        const double loss = result.head.bce(validation.embeddings, validation.targets);
        return std::pair{loss, accuracy(result.head.logits(validation.embeddings), validation.targets)};
      },
      [&] { best_params = result.head.parameters(); },
      [&] { result.head.parameters() = best_params; }, result.best_epoch);
  return result;
}

HeadTrainResult train_head(EncoderHandle& handle, const CorpusSplit& split,
                           const HeadTrainConfig& config) {
  config.validate();
  if (is_frozen(config.mode)) {
    const EncoderHandle frozen = handle.with_trainable(false);
    return train_head_on_embeddings(embed_labeled(split.train, frozen),
                                    embed_labeled(split.validation, frozen), config);
  }

  if (!handle.backend().supports_training()) {
    throw Error(ErrorCode::kUnsupportedForBackend,
                "backend '" + handle.backend_id() + "' cannot be fine-tuned");
  }
  const SampleSet train = collect_samples(split.train);
  const SampleSet validation = collect_samples(split.validation);
  if (train.texts.empty() || validation.texts.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "head training needs train and validation rows");
  }
  EncoderBackend& backend = handle.backend();
  HeadTrainResult result;
  result.head = MlpHead(handle.dimension(), config.seed);
  const AdamWConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay};
  AdamW head_opt(result.head.parameters().size(), adam);
  AdamW encoder_opt(backend.parameters().size(), adam);
  Eigen::VectorXd best_head, best_encoder;
  Eigen::VectorXd head_grad, encoder_grad;
  Eigen::MatrixXd input_grad;

  result.history = run_epochs(
      train.texts.size(), config,
      [&](std::span<const std::size_t> rows) {
        std::vector<std::string> texts;
        texts.reserve(rows.size());
        for (std::size_t r : rows) texts.push_back(train.texts[r]);
        std::unique_ptr<ForwardTape> tape;
        const Eigen::MatrixXd x = backend.forward(texts, handle.pooling(), tape);
        const double loss = result.head.bce(x, gather(train.targets, rows), &head_grad, &input_grad);
        encoder_grad.setZero(backend.parameters().size());
        backend.backward(*tape, input_grad, encoder_grad);
        clip_global_norm(head_grad, config.grad_clip_norm);
        clip_global_norm(encoder_grad, config.grad_clip_norm);
        head_opt.step(result.head.parameters(), head_grad);
        encoder_opt.step(backend.parameters(), encoder_grad);
        return loss;
      },
      [&] {
        const Eigen::MatrixXd x = backend.encode(validation.texts, handle.pooling());
        const double loss = result.head.bce(x, validation.targets);
        return std::pair{loss, accuracy(result.head.logits(x), validation.targets)};
      },
      [&] {
        best_head = result.head.parameters();
        best_encoder = backend.parameters();
      },
      [&] {
        result.head.parameters() = best_head;
        backend.parameters() = best_encoder;
      },
      result.best_epoch);
  return result;
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

double macro_f1(const Confusion& c) {
  return 0.5 * (class_f1(c.tp, c.fp, c.fn) + class_f1(c.tn, c.fn, c.fp));
}

F1Report score_predictions(const Eigen::VectorXd& probabilities, const LabeledSet& truth,
                           EncoderMode mode, double threshold) {
  if (probabilities.size() != truth.targets.size() ||
      truth.categories.size() != static_cast<std::size_t>(truth.targets.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "predictions and labels disagree in length");
  }
  F1Report report;
  report.mode = mode;
  report.threshold = threshold;
  for (Eigen::Index i = 0; i < probabilities.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    const bool actual = truth.targets[i] > 0.5;
    Confusion& c = report.per_category_confusion[truth.categories[static_cast<std::size_t>(i)]];
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  for (const auto& [category, c] : report.per_category_confusion) {
    report.per_category_f1[category] = macro_f1(c);
    report.confusion += c;
  }
  report.macro_f1 = macro_f1(report.confusion);
  return report;
}

F1Report evaluate_head(const MlpHead& head, const EncoderHandle& handle,
                       const std::vector<ContextGroup>& groups, EncoderMode mode, double threshold) {
  const LabeledSet set = embed_labeled(groups, handle);
  return score_predictions(head.predict_proba(set.embeddings), set, mode, threshold);
}

json to_json(const F1Report& r) {
  auto confusion_json = [](const Confusion& c) {
    return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
  };
  json per = json::object();
  for (const auto& [category, f1] : r.per_category_f1) {
    per[std::string(to_string(category))] = {
        {"macro_f1", f1}, {"confusion", confusion_json(r.per_category_confusion.at(category))}};
  }
  return {{"encoder_mode", to_string(r.mode)},
          {"threshold", r.threshold},
          {"macro_f1", r.macro_f1},
          {"confusion", confusion_json(r.confusion)},
          {"per_category", per}};
}

void save_head(const MlpHead& head, const std::filesystem::path& path, const json& extra) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  json j = head.to_json();
  if (!extra.is_null()) j["training"] = extra;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << j.dump() << '\n';
}

MlpHead load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + e.what());
  }
  return MlpHead::from_json(j);
}

}  // namespace contrabias
