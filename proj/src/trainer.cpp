#include "contrabias/trainer.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "contrabias/error.hpp"
#include "contrabias/optim.hpp"
#include "contrabias/random.hpp"
#include "contrabias/repr_metrics.hpp"

namespace contrabias {
namespace {

using nlohmann::json;

bool is_batch_shape_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kNoPositivePair:
    case ErrorCode::kNoNegativePair:
    case ErrorCode::kNoLabeledPairs:
    case ErrorCode::kNoTripletConstructible:
      return true;
    default:
      return false;
  }
}

PairBatch to_pair_batch(const SentenceBatch& batch, Eigen::MatrixXd embeddings) {
  PairBatch out;
  out.embeddings = std::move(embeddings);
  out.labels = batch.labels;
  out.context_ids = batch.context_ids;
  return out;
}

double validation_delta_sim(const EncoderHandle& handle, const std::vector<ContextGroup>& groups) {
  try {
    return delta_sim(groups, handle).delta_sim;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNoIntraPairs || e.code() == ErrorCode::kNoInterPairs) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    throw;
  }
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  std::uint64_t state = seed ^ (static_cast<std::uint64_t>(epoch) * 0xD1B54A32D192ED03ULL);
  return splitmix64(state);
}

std::vector<SentenceBatch> pack(const std::vector<ContextGroup>& groups,
                                const std::vector<std::size_t>& order, int batch_size) {
  if (batch_size < 2) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 2");
  std::vector<SentenceBatch> batches;
  SentenceBatch current;
  for (std::size_t idx : order) {
    const ContextGroup& g = groups[idx];
    if (g.size() > static_cast<std::size_t>(batch_size)) {
      throw Error(ErrorCode::kContextLargerThanBatch,
                  "context '" + g.context_id + "' has " + std::to_string(g.size()) +
                      " sentences; batch_size is " + std::to_string(batch_size));
    }
    if (current.texts.size() + g.size() > static_cast<std::size_t>(batch_size)) {
      batches.push_back(std::move(current));
      current = SentenceBatch{};
    }
    for (const auto* members : {&g.stereotypes, &g.anti_stereotypes}) {
      for (const SentenceRecord& r : *members) {
        current.texts.push_back(r.text);
        current.labels.push_back(r.label);
        current.context_ids.push_back(r.context_id);
      }
    }
    current.group_indices.push_back(idx);
  }
  if (!current.texts.empty()) batches.push_back(std::move(current));
  return batches;
}

json double_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double null_or_double(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string format_hyper(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

void TrainConfig::validate() const {
  loss.validate();
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be >= 0");
  if (batch_size < 2) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 2");
  if (max_epochs < 1) throw Error(ErrorCode::kInvalidArgument, "max_epochs must be >= 1");
  if (patience < 1) throw Error(ErrorCode::kInvalidArgument, "patience must be >= 1");
}

double TrainRunRecord::max_validation_delta_sim() const {
  double best_value = std::numeric_limits<double>::quiet_NaN();
  for (const auto& e : epochs) {
    if (std::isfinite(e.validation_delta_sim) &&
        !(best_value >= e.validation_delta_sim)) {
      best_value = e.validation_delta_sim;
    }
  }
  return best_value;
}

const EpochMetrics& TrainRunRecord::best() const {
  for (const auto& e : epochs) {
    if (e.epoch == best_epoch) return e;
  }
  throw Error(ErrorCode::kInvalidArgument, "record has no metrics for its best epoch");
}

std::vector<SentenceBatch> make_batches(const std::vector<ContextGroup>& groups, int batch_size,
                                        std::uint64_t seed) {
  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  return pack(groups, order, batch_size);
}

std::vector<SentenceBatch> make_batches_in_order(const std::vector<ContextGroup>& groups,
                                                 int batch_size) {
  std::vector<std::size_t> order(groups.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return pack(groups, order, batch_size);
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw Error(ErrorCode::kInvalidArgument, "patience must be >= 1");
}

bool EarlyStopping::observe(double value) {
  if (value < best_) {
    best_ = value;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

double evaluate_loss(const EncoderHandle& handle, const std::vector<SentenceBatch>& batches,
                     const LossConfig& loss) {
  double total = 0.0;
  std::size_t scored = 0;
  for (const SentenceBatch& batch : batches) {
    try {
      const PairBatch pb = to_pair_batch(batch, embed_matrix(handle, batch.texts));
      total += compute_loss(pb, loss, false).value;
      ++scored;
    } catch (const Error& e) {
      if (!is_batch_shape_error(e)) throw;
    }
  }
  if (scored == 0) {
    throw Error(ErrorCode::kIncompatibleLossConfig,
                "no batch admits " + std::string(to_string(loss.kind)));
  }
  return total / static_cast<double>(scored);
}

TrainRunRecord train(EncoderHandle& handle, const CorpusSplit& split, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw Error(ErrorCode::kInvalidArgument, "training split is empty");
  if (split.validation.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "validation split is empty");
  }

  TrainRunRecord record;
  record.config = config;
  const auto validation_batches = make_batches_in_order(split.validation, config.batch_size);
  const auto metric_of = [&](const EpochMetrics& m) {
    return config.stop_metric == StopMetric::kValidationLoss ? m.validation_loss
                                                             : -m.validation_delta_sim;
  };

  EpochMetrics initial;
  initial.epoch = 0;
  initial.train_loss =
      evaluate_loss(handle, make_batches_in_order(split.train, config.batch_size), config.loss);
  initial.validation_loss = evaluate_loss(handle, validation_batches, config.loss);
  initial.validation_delta_sim = validation_delta_sim(handle, split.validation);
  record.epochs.push_back(initial);
  if (on_epoch) on_epoch(initial);

  EarlyStopping stopper(config.patience);
  stopper.observe(metric_of(initial));

  const bool update = handle.trainable();
  EncoderBackend& backend = handle.backend();
  Eigen::VectorXd best_params;
  std::optional<AdamW> optimizer;
  Eigen::VectorXd grad;
  if (update) {
    best_params = backend.parameters();
    optimizer.emplace(best_params.size(),
                      AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
    grad.resize(best_params.size());
  }

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = make_batches(split.train, config.batch_size, epoch_seed(config.seed, epoch));
    double loss_sum = 0.0;
    std::size_t scored = 0;
    for (const SentenceBatch& batch : batches) {
      std::unique_ptr<ForwardTape> tape;
      Eigen::MatrixXd emb = update ? backend.forward(batch.texts, handle.pooling(), tape)
                                   : embed_matrix(handle, batch.texts);
      LossOutput out;
      try {
        out = compute_loss(to_pair_batch(batch, std::move(emb)), config.loss, update);
      } catch (const Error& e) {
        if (is_batch_shape_error(e)) continue;
        throw;
      }
      if (!std::isfinite(out.value) || (update && !out.gradient.allFinite())) {
        throw Error(ErrorCode::kDivergedLoss, "non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_sum += out.value;
      ++scored;
      if (update) {
        grad.setZero();
        backend.backward(*tape, out.gradient, grad);
        clip_global_norm(grad, config.grad_clip_norm);
        optimizer->step(backend.parameters(), grad);
      }
    }
    if (scored == 0) {
      throw Error(ErrorCode::kIncompatibleLossConfig,
                  "no training batch admits " + std::string(to_string(config.loss.kind)));
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(scored);
    m.validation_loss = evaluate_loss(handle, validation_batches, config.loss);
    if (!std::isfinite(m.validation_loss)) {
      throw Error(ErrorCode::kDivergedLoss, "non-finite validation loss at epoch " +
                                                std::to_string(epoch));
    }
    m.validation_delta_sim = validation_delta_sim(handle, split.validation);
    record.epochs.push_back(m);
    record.stopped_epoch = epoch;
    if (on_epoch) on_epoch(m);

    if (stopper.observe(metric_of(m))) {
      record.best_epoch = epoch;
      if (update) best_params = backend.parameters();
    }
    if (stopper.should_stop()) break;
  }

  if (update) backend.parameters() = best_params;
  if (config.checkpoint_dir) {
    const std::string run_id = config.run_id.empty() ? "run" : config.run_id;
    const auto dir = *config.checkpoint_dir / run_id;
    save_checkpoint(handle, dir, to_json(config));
    record.best_checkpoint = dir;
  }
  return record;
}

SweepResult sweep(const EncoderHandle& handle, const CorpusSplit& split, const SweepGrid& grid,
                  const std::vector<LossKind>& losses, const TrainConfig& base) {
  if (losses.empty() || grid.epochs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "sweep grid is empty");
  }
  SweepResult result;
  for (LossKind kind : losses) {
    const bool temperature = uses_temperature(kind);
    const auto& values = temperature ? grid.temperatures : grid.margins;
    if (values.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("no ") + (temperature ? "temperatures" : "margins") + " for " +
                      std::string(to_string(kind)));
    }
    for (double value : values) {
      for (int epochs : grid.epochs) {
        TrainConfig config = base;
        config.loss.kind = kind;
        (temperature ? config.loss.temperature : config.loss.margin) = value;
        config.max_epochs = epochs;
        config.run_id = std::string(to_string(kind)) + (temperature ? "_t" : "_m") +
                        format_hyper(value) + "_e" + std::to_string(epochs);
        EncoderHandle cell = handle.clone();
        try {
          result.records.push_back(train(cell, split, config));
        } catch (const Error& e) {
          TrainRunRecord failed;
          failed.config = config;
          failed.failure = e.what();
          result.records.push_back(std::move(failed));
        }
      }
    }
  }
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& r = result.records[i];
    if (r.failure) continue;
    const double score = r.max_validation_delta_sim();
    if (!std::isfinite(score)) continue;
    auto it = result.best_per_loss.find(r.config.loss.kind);
    if (it == result.best_per_loss.end() ||
        score > result.records[it->second].max_validation_delta_sim()) {
      result.best_per_loss[r.config.loss.kind] = i;
    }
  }
  return result;
}

json to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss.kind)},
          {"temperature", c.loss.temperature},
          {"margin", c.loss.margin},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"weight_decay", c.weight_decay},
          {"grad_clip_norm", c.grad_clip_norm},
          {"stop_metric",
           c.stop_metric == StopMetric::kValidationLoss ? "validation_loss" : "delta_sim"},
          {"run_id", c.run_id}};
}

json to_json(const TrainRunRecord& r) {
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", double_or_null(e.train_loss)},
                      {"validation_loss", double_or_null(e.validation_loss)},
                      {"validation_delta_sim", double_or_null(e.validation_delta_sim)}});
  }
  json out = {{"config", to_json(r.config)},
              {"epochs", epochs},
              {"best_epoch", r.best_epoch},
              {"stopped_epoch", r.stopped_epoch}};
  out["best_checkpoint"] = r.best_checkpoint ? json(r.best_checkpoint->string()) : json(nullptr);
  out["failure"] = r.failure ? json(*r.failure) : json(nullptr);
  return out;
}

TrainRunRecord train_record_from_json(const json& j) {
  TrainRunRecord r;
  const json& c = j.at("config");
  r.config.loss.kind = parse_loss_kind(c.at("loss").get<std::string>());
  r.config.loss.temperature = c.value("temperature", r.config.loss.temperature);
  r.config.loss.margin = c.value("margin", r.config.loss.margin);
  r.config.learning_rate = c.value("learning_rate", r.config.learning_rate);
  r.config.batch_size = c.value("batch_size", r.config.batch_size);
  r.config.max_epochs = c.value("max_epochs", r.config.max_epochs);
  r.config.patience = c.value("patience", r.config.patience);
  r.config.seed = c.value("seed", r.config.seed);
  r.config.weight_decay = c.value("weight_decay", r.config.weight_decay);
  r.config.grad_clip_norm = c.value("grad_clip_norm", r.config.grad_clip_norm);
  r.config.stop_metric = c.value("stop_metric", std::string("validation_loss")) == "delta_sim"
                             ? StopMetric::kValidationDeltaSim
                             : StopMetric::kValidationLoss;
  r.config.run_id = c.value("run_id", std::string());
  for (const json& e : j.at("epochs")) {
    EpochMetrics m;
    m.epoch = e.at("epoch").get<int>();
    m.train_loss = null_or_double(e.at("train_loss"));
    m.validation_loss = null_or_double(e.at("validation_loss"));
    m.validation_delta_sim = null_or_double(e.at("validation_delta_sim"));
    r.epochs.push_back(m);
  }
  r.best_epoch = j.value("best_epoch", 0);
  r.stopped_epoch = j.value("stopped_epoch", 0);
  if (j.contains("best_checkpoint") && j["best_checkpoint"].is_string()) {
    r.best_checkpoint = j["best_checkpoint"].get<std::string>();
  }
  if (j.contains("failure") && j["failure"].is_string()) r.failure = j["failure"].get<std::string>();
  return r;
}

void write_metrics_csv(const std::vector<TrainRunRecord>& records, std::ostream& out) {
  out << "run_id,loss,temperature,margin,max_epochs,epoch,train_loss,validation_loss,"
         "validation_delta_sim\n";
  const auto cell = [](double v) { return std::isfinite(v) ? format_hyper(v) : std::string(); };
  for (const auto& r : records) {
    for (const auto& e : r.epochs) {
      out << r.config.run_id << ',' << to_string(r.config.loss.kind) << ','
          << format_hyper(r.config.loss.temperature) << ',' << format_hyper(r.config.loss.margin)
          << ',' << r.config.max_epochs << ',' << e.epoch << ',' << cell(e.train_loss) << ','
          << cell(e.validation_loss) << ',' << cell(e.validation_delta_sim) << '\n';
    }
  }
}

}  // namespace contrabias
