// contrabias command-line interface.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <yaml-cpp/yaml.h>

#include "contrabias/bias_scoring.hpp"
#include "contrabias/corpus.hpp"
#include "contrabias/embedder.hpp"
#include "contrabias/error.hpp"
#include "contrabias/llm_gateway.hpp"
#include "contrabias/reports.hpp"
#include "contrabias/repr_metrics.hpp"
#include "contrabias/stereo_classifier.hpp"
#include "contrabias/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace contrabias;

namespace {

// Reads JSON or YAML (JSON is valid YAML). Nested maps address subcommands,
// e.g. {"classify": {"train-head": {"mode": "frozen_contrastive"}}}.
class YamlConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::vector<CLI::ConfigItem> items;
    YAML::Node root;
    try {
      root = YAML::Load(buffer.str());
    } catch (const YAML::Exception& e) {
      throw CLI::ConversionError("config", e.what());
    }
    if (root.IsMap()) collect(root, {}, items);
    return items;
  }

 private:
  static void collect(const YAML::Node& node, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      const YAML::Node& value = kv.second;
      if (value.IsMap()) {
        auto next = parents;
        next.push_back(key);
        collect(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.IsSequence()) {
        for (const auto& v : value) item.inputs.push_back(v.as<std::string>());
      } else if (!value.IsNull()) {
        item.inputs.push_back(value.as<std::string>());
      }
      items.push_back(std::move(item));
    }
  }
};

struct EncoderOptions {
  std::string backend = "hashed-token";
  std::string pooling = "mean";
  int dimension = kDefaultDimension;
  int buckets = 8192;
  std::uint64_t seed = 0;
  std::string checkpoint;

  EncoderHandle load(bool trainable) const {
    if (!checkpoint.empty()) return load_checkpoint(checkpoint).with_trainable(trainable);
    EncoderSpec spec;
    spec.backend_id = backend;
    spec.pooling = parse_pooling(pooling);
    spec.dimension = dimension;
    spec.buckets = buckets;
    spec.seed = seed;
    spec.trainable = trainable;
    return make_encoder(spec);
  }
};

struct CorpusOptions {
  std::string corpus;
  double split_fraction = 0.2;
  std::uint64_t seed = 0;

  CorpusSplit split() const {
    return split_by_context(load_indicasa(corpus), split_fraction, seed);
  }
};

void add_encoder_options(CLI::App* app, EncoderOptions& o) {
  app->add_option("--backend", o.backend, "Encoder backend id (hashed-token, stub)");
  app->add_option("--pooling", o.pooling, "mean or first_token");
  app->add_option("--dimension", o.dimension, "Embedding width");
  app->add_option("--buckets", o.buckets, "Hash buckets (hashed-token)");
  app->add_option("--encoder-seed", o.seed, "Encoder initialization seed");
  app->add_option("--encoder-checkpoint", o.checkpoint, "Checkpoint directory to load instead");
}

void add_corpus_options(CLI::App* app, CorpusOptions& o) {
  app->add_option("--corpus", o.corpus, "IndiCASA corpus (.jsonl or .csv)")->required()->check(CLI::ExistingFile);
  app->add_option("--split-fraction", o.split_fraction, "Fraction of contexts held out");
  app->add_option("--seed", o.seed, "Split and shuffling seed");
}

void write_json_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream os;
  os << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// --- train / sweep ---------------------------------------------------------------

struct TrainOptions {
  CorpusOptions corpus;
  EncoderOptions encoder;
  std::string loss = "ntb_xent";
  double temperature = 0.1;
  double margin = 0.5;
  double learning_rate = 5e-5;
  int batch_size = 256;
  int epochs = 30;
  int patience = 3;
  std::string stop_metric = "validation_loss";
  std::string out = "runs";
  std::string run_id;
};

TrainConfig make_train_config(const TrainOptions& o) {
  TrainConfig c;
  c.loss.kind = parse_loss_kind(o.loss);
  c.loss.temperature = o.temperature;
  c.loss.margin = o.margin;
  c.learning_rate = o.learning_rate;
  c.batch_size = o.batch_size;
  c.max_epochs = o.epochs;
  c.patience = o.patience;
  c.seed = o.corpus.seed;
  if (o.stop_metric == "validation_delta_sim") {
    c.stop_metric = StopMetric::kValidationDeltaSim;
  } else if (o.stop_metric != "validation_loss") {
    throw Error(ErrorCode::kInvalidArgument, "unknown stop metric '" + o.stop_metric + "'");
  }
  return c;
}

void add_train_options(CLI::App* app, TrainOptions& o) {
  add_corpus_options(app, o.corpus);
  add_encoder_options(app, o.encoder);
  app->add_option("--temperature", o.temperature, "Temperature for nt_xent / ntb_xent");
  app->add_option("--margin", o.margin, "Margin for pairwise / triplet");
  app->add_option("--lr", o.learning_rate, "AdamW learning rate");
  app->add_option("--batch-size", o.batch_size, "Sentences per batch");
  app->add_option("--patience", o.patience, "Early-stopping patience (epochs)");
  app->add_option("--stop-metric", o.stop_metric, "validation_loss or validation_delta_sim");
  app->add_option("--out", o.out, "Output directory");
  app->add_option("--run-id", o.run_id, "Run name (default derived from the loss)");
}

int run_train(const TrainOptions& o) {
  const CorpusSplit split = o.corpus.split();
  EncoderHandle handle = o.encoder.load(true);
  TrainConfig config = make_train_config(o);
  config.run_id = o.run_id.empty() ? std::string(to_string(config.loss.kind)) : o.run_id;
  config.checkpoint_dir = fs::path(o.out);
  const TrainRunRecord record = train(handle, split, config, [](const EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << "  train_loss " << m.train_loss << "  val_loss "
              << m.validation_loss << "  val_delta_sim " << m.validation_delta_sim << '\n';
  });
  const fs::path run_dir = fs::path(o.out) / config.run_id;
  json j = to_json(record);
  j["corpus"] = o.corpus.corpus;
  j["created"] = timestamp();
  write_json_file(run_dir / "train_record.json", j);
  std::ofstream csv(run_dir / "metrics.csv");
  write_metrics_csv({record}, csv);
  std::cout << "best epoch " << record.best_epoch << ", checkpoint " << run_dir.string() << '\n';
  return 0;
}

struct SweepOptions {
  TrainOptions base;
  std::vector<std::string> losses = {"nt_xent", "ntb_xent", "pairwise", "triplet"};
  std::vector<double> temperatures = SweepGrid{}.temperatures;
  std::vector<double> margins = SweepGrid{}.margins;
  std::vector<int> epochs = SweepGrid{}.epochs;
};

int run_sweep(const SweepOptions& o) {
  const CorpusSplit split = o.base.corpus.split();
  const EncoderHandle handle = o.base.encoder.load(true);
  SweepGrid grid{o.temperatures, o.margins, o.epochs};
  std::vector<LossKind> kinds;
  for (const auto& l : o.losses) kinds.push_back(parse_loss_kind(l));
  TrainConfig base = make_train_config(o.base);
  const std::string run_id = o.base.run_id.empty() ? "sweep" : o.base.run_id;
  base.checkpoint_dir = fs::path(o.base.out) / run_id / "checkpoints";
  const SweepResult result = sweep(handle, split, grid, kinds, base);
  const ReportPaths paths = make_report_dirs(o.base.out, run_id);
  emit_sweep_heatmap(result.records, paths);
  for (const auto& [kind, index] : result.best_per_loss) {
    const auto& r = result.records[index];
    std::cout << to_string(kind) << ": best " << r.config.run_id << " max val delta_sim "
              << r.max_validation_delta_sim() << '\n';
  }
  std::cout << result.records.size() << " runs written to " << paths.root.string() << '\n';
  return 0;
}

// --- metrics ---------------------------------------------------------------------

struct DeltaSimOptions {
  CorpusOptions corpus;
  EncoderOptions encoder;
  std::string split = "validation";
  std::string out;
};

int run_deltasim(const DeltaSimOptions& o) {
  const CorpusSplit split = o.corpus.split();
  const std::vector<ContextGroup>* groups = &split.validation;
  std::vector<ContextGroup> all;
  if (o.split == "train") {
    groups = &split.train;
  } else if (o.split == "all") {
    all = split.train;
    all.insert(all.end(), split.validation.begin(), split.validation.end());
    groups = &all;
  } else if (o.split != "validation") {
    throw Error(ErrorCode::kInvalidArgument, "--split must be train, validation or all");
  }
  const EncoderHandle handle = o.encoder.load(false);
  const SimReport report = delta_sim(*groups, handle);
  std::cout << format_sim_table(report);
  if (!o.out.empty()) {
    json j = to_json(report);
    j["split"] = o.split;
    j["encoder"] = handle.backend().manifest();
    write_json_file(o.out, j);
  }
  return 0;
}

// --- evaluate --------------------------------------------------------------------

struct EvaluateOptions {
  EncoderOptions encoder;
  std::string endpoint;
  std::string model_id;
  std::string token_env = "CONTRABIAS_API_KEY";
  std::string eval_set;
  std::string out = "report.json";
  std::string journal;
  std::string cassette;
  GenerationConfig generation;
  int max_in_flight = 4;
  double timeout = 60.0;
};

int run_evaluate(const EvaluateOptions& o) {
  const std::vector<EvalItem> items = load_eval_set(o.eval_set);
  std::shared_ptr<ChatEndpoint> endpoint;
  if (!o.cassette.empty()) {
    endpoint = std::make_shared<CassetteEndpoint>(o.cassette);
  } else {
    ModelEndpoint m = ModelEndpoint::from_env();
    if (!o.endpoint.empty()) m.base_url = o.endpoint;
    if (!o.model_id.empty()) m.model_id = o.model_id;
    m.token_env = o.token_env;
    m.timeout_seconds = o.timeout;
    endpoint = std::make_shared<OpenAiChatEndpoint>(m);
  }
  if (!o.journal.empty()) endpoint = std::make_shared<JournalingEndpoint>(endpoint, o.journal);

  const EncoderHandle handle = o.encoder.load(false);
  const EvaluationRun run =
      evaluate(*endpoint, items, handle, o.generation, o.max_in_flight, o.model_id);

  json j = to_json(run.report);
  j["eval_set"] = o.eval_set;
  j["generation"] = {{"top_p", o.generation.top_p},
                     {"temperature", o.generation.temperature},
                     {"n_queries_per_item", o.generation.n_queries_per_item},
                     {"max_retries_per_query", o.generation.max_retries_per_query}};
  j["encoder"] = handle.backend().manifest();
  j["created"] = timestamp();
  write_json_file(o.out, j);

  const fs::path stem = fs::path(o.out).replace_extension();
  std::ofstream verdicts(stem.string() + ".verdicts.jsonl");
  for (const auto& v : run.verdicts) verdicts << to_json(v).dump() << '\n';
  std::ofstream completions(stem.string() + ".completions.jsonl");
  for (const auto& per_item : run.completions) {
    for (const auto& c : per_item) completions << to_json(c).dump() << '\n';
  }
  std::cout << bias_table_markdown({run.report});
  return 0;
}

// --- classify --------------------------------------------------------------------

struct HeadOptions {
  CorpusOptions corpus;
  EncoderOptions encoder;
  std::string mode = "frozen_contrastive";
  double learning_rate = HeadTrainConfig{}.learning_rate;
  int epochs = HeadTrainConfig{}.max_epochs;
  int batch_size = HeadTrainConfig{}.batch_size;
  int patience = HeadTrainConfig{}.patience;
  int freeze = -1;  // -1 keeps --mode as given
  std::string out = "head.json";
};

int run_train_head(const HeadOptions& o) {
  const CorpusSplit split = o.corpus.split();
  HeadTrainConfig config;
  config.mode = parse_encoder_mode(o.mode);
  if (o.freeze >= 0) {
    const bool contrastive = config.mode == EncoderMode::kFrozenContrastive ||
                             config.mode == EncoderMode::kUnfrozenContrastive;
    config.mode = o.freeze ? (contrastive ? EncoderMode::kFrozenContrastive : EncoderMode::kFrozenVanilla)
                           : (contrastive ? EncoderMode::kUnfrozenContrastive : EncoderMode::kUnfrozenVanilla);
  }
  config.learning_rate = o.learning_rate;
  config.max_epochs = o.epochs;
  config.batch_size = o.batch_size;
  config.patience = o.patience;
  config.seed = o.corpus.seed;
  EncoderHandle handle = o.encoder.load(!is_frozen(config.mode));
  const HeadTrainResult result = train_head(handle, split, config);
  const F1Report report = evaluate_head(result.head, handle, split.validation, config.mode);
  json extra = {{"mode", to_string(config.mode)},
                {"learning_rate", config.learning_rate},
                {"max_epochs", config.max_epochs},
                {"best_epoch", result.best_epoch},
                {"seed", config.seed},
                {"encoder", handle.backend().manifest()}};
  save_head(result.head, o.out, extra);
  if (!is_frozen(config.mode)) {
    const fs::path encoder_dir = fs::path(o.out).replace_extension().string() + "_encoder";
    save_checkpoint(handle, encoder_dir, extra);
    std::cout << "fine-tuned encoder saved to " << encoder_dir.string() << '\n';
  }
  std::cout << to_string(config.mode) << " validation macro-F1 " << std::fixed << std::setprecision(3) << report.macro_f1
            << " (best epoch " << result.best_epoch << ")\n";
  return 0;
}

struct HeadEvalOptions {
  CorpusOptions corpus;
  EncoderOptions encoder;
  std::string head;
  std::string mode = "frozen_contrastive";
  std::string split = "validation";
  double threshold = 0.5;
  std::string out;
};

int run_eval_head(const HeadEvalOptions& o) {
  const CorpusSplit split = o.corpus.split();
  const MlpHead head = load_head(o.head);
  const EncoderHandle handle = o.encoder.load(false);
  const auto& groups = o.split == "train" ? split.train : split.validation;
  const F1Report report = evaluate_head(head, handle, groups, parse_encoder_mode(o.mode), o.threshold);
  std::cout << "overall macro-F1 " << std::fixed << std::setprecision(3) << report.macro_f1 << '\n';
  for (const auto& [category, f1] : report.per_category_f1) {
    std::cout << "  " << display_name(category) << ' ' << f1 << '\n';
  }
  if (!o.out.empty()) write_json_file(o.out, to_json(report));
  return 0;
}

// --- report ----------------------------------------------------------------------

struct ReportOptions {
  std::vector<std::string> bias_reports;
  std::string sweep_records;
  std::string regenerate;
  std::string out = "reports";
  std::string run_id = "report";
  // t-SNE of validation sentences of one category.
  std::string tsne_corpus;
  std::string tsne_category;
  double split_fraction = 0.2;
  std::uint64_t seed = 0;
  double perplexity = 30.0;
  int iterations = 1000;
  EncoderOptions encoder;
};

int run_report(const ReportOptions& o) {
  if (!o.regenerate.empty()) {
    ReportPaths paths;
    paths.root = o.regenerate;
    paths.tables = paths.root / "tables";
    paths.figures = paths.root / "figures";
    paths.json = paths.root / "json";
    fs::create_directories(paths.tables);
    fs::create_directories(paths.figures);
    std::cout << regenerate_from_json(paths) << " artifacts regenerated in " << paths.root.string() << '\n';
    return 0;
  }
  const ReportPaths paths = make_report_dirs(o.out, o.run_id);
  json meta = {{"run_id", o.run_id}, {"created", timestamp()}, {"inputs", json::array()}};
  if (!o.bias_reports.empty()) {
    std::vector<BiasReport> reports;
    for (const auto& path : o.bias_reports) {
      std::ifstream in(path);
      if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
      BiasReport r = bias_report_from_json(json::parse(in));
      if (r.model_id.empty()) r.model_id = fs::path(path).stem().string();
      reports.push_back(std::move(r));
      meta["inputs"].push_back(path);
    }
    emit_bias_table(reports, paths);
  }
  if (!o.sweep_records.empty()) {
    std::ifstream in(o.sweep_records);
    if (!in) throw Error(ErrorCode::kIoError, "cannot read " + o.sweep_records);
    const json j = json::parse(in);
    std::vector<TrainRunRecord> records;
    for (const auto& r : j.contains("records") ? j.at("records") : j) records.push_back(train_record_from_json(r));
    emit_sweep_heatmap(records, paths);
    meta["inputs"].push_back(o.sweep_records);
  }
  if (!o.tsne_corpus.empty()) {
    const CorpusSplit split = split_by_context(load_indicasa(o.tsne_corpus), o.split_fraction, o.seed);
    auto groups = split.validation;
    if (!o.tsne_category.empty()) {
      auto category = parse_category(o.tsne_category);
      if (!category) throw Error(ErrorCode::kUnknownCategory, o.tsne_category);
      groups = filter_by_category(groups, *category);
    }
    std::vector<std::string> texts, labels;
    for (const auto& g : groups) {
      for (const auto* members : {&g.stereotypes, &g.anti_stereotypes}) {
        for (const auto& r : *members) {
          texts.push_back(r.text);
          labels.emplace_back(to_string(r.label));
        }
      }
    }
    const EncoderHandle handle = o.encoder.load(false);
    TsneConfig tc;
    tc.perplexity = o.perplexity;
    tc.iterations = o.iterations;
    tc.seed = o.seed;
    const std::string stem = "tsne_" + (o.tsne_category.empty() ? std::string("all") : o.tsne_category);
    emit_tsne(embed_matrix(handle, texts), labels, tc, paths, stem, stem + " (" + handle.backend_id() + ")");
    meta["inputs"].push_back(o.tsne_corpus);
  }
  write_json_file(paths.root / "run.json", meta);
  std::cout << "report bundle written to " << paths.root.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive bias measurement toolkit"};
  app.config_formatter(std::make_shared<YamlConfig>());
  app.set_config("--config", "", "JSON or YAML file with option values");
  app.require_subcommand(1);
  std::function<int()> action;

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Fine-tune an encoder with a contrastive loss");
  add_train_options(train_cmd, train_opts);
  train_cmd->add_option("--loss", train_opts.loss, "nt_xent, ntb_xent, pairwise or triplet");
  train_cmd->add_option("--epochs", train_opts.epochs, "Maximum epochs");
  train_cmd->callback([&] { action = [&] { return run_train(train_opts); }; });

  SweepOptions sweep_opts;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid of training runs with heatmap output");
  add_train_options(sweep_cmd, sweep_opts.base);
  sweep_cmd->add_option("--losses", sweep_opts.losses, "Losses to sweep")->delimiter(',');
  sweep_cmd->add_option("--temperatures", sweep_opts.temperatures)->delimiter(',');
  sweep_cmd->add_option("--margins", sweep_opts.margins)->delimiter(',');
  sweep_cmd->add_option("--epochs-grid", sweep_opts.epochs, "Epoch budgets")->delimiter(',');
  sweep_cmd->callback([&] { action = [&] { return run_sweep(sweep_opts); }; });

  auto* metrics_cmd = app.add_subcommand("metrics", "Representation metrics");
  metrics_cmd->require_subcommand(1);
  DeltaSimOptions ds_opts;
  auto* ds_cmd = metrics_cmd->add_subcommand("deltasim", "Within-context separation of an encoder");
  add_corpus_options(ds_cmd, ds_opts.corpus);
  add_encoder_options(ds_cmd, ds_opts.encoder);
  ds_cmd->add_option("--split", ds_opts.split, "train, validation or all");
  ds_cmd->add_option("--out", ds_opts.out, "Write the report as JSON");
  ds_cmd->callback([&] { action = [&] { return run_deltasim(ds_opts); }; });

  EvaluateOptions ev_opts;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score an LLM on masked evaluation items");
  add_encoder_options(ev_cmd, ev_opts.encoder);
  ev_cmd->add_option("--model-endpoint", ev_opts.endpoint, "OpenAI-compatible base URL");
  ev_cmd->add_option("--model-id", ev_opts.model_id, "Model name sent to the endpoint");
  ev_cmd->add_option("--token-env", ev_opts.token_env, "Variable holding the bearer token");
  ev_cmd->add_option("--eval-set", ev_opts.eval_set)->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--out", ev_opts.out, "Report JSON path");
  ev_cmd->add_option("--journal", ev_opts.journal, "Append every exchange to this JSONL file");
  ev_cmd->add_option("--cassette", ev_opts.cassette, "Replay a journal instead of calling out");
  ev_cmd->add_option("--top-p", ev_opts.generation.top_p);
  ev_cmd->add_option("--temperature", ev_opts.generation.temperature);
  ev_cmd->add_option("--n-queries", ev_opts.generation.n_queries_per_item);
  ev_cmd->add_option("--max-retries", ev_opts.generation.max_retries_per_query);
  ev_cmd->add_option("--max-in-flight", ev_opts.max_in_flight);
  ev_cmd->add_option("--timeout", ev_opts.timeout, "Per-request timeout in seconds");
  ev_cmd->callback([&] { action = [&] { return run_evaluate(ev_opts); }; });

  auto* cls_cmd = app.add_subcommand("classify", "Stereotype detector head");
  cls_cmd->require_subcommand(1);
  HeadOptions head_opts;
  auto* th_cmd = cls_cmd->add_subcommand("train-head", "Train the MLP head");
  add_corpus_options(th_cmd, head_opts.corpus);
  add_encoder_options(th_cmd, head_opts.encoder);
  th_cmd->add_option("--mode", head_opts.mode,
                     "frozen_vanilla, frozen_contrastive, unfrozen_vanilla or unfrozen_contrastive");
  th_cmd->add_flag_callback("--freeze", [&] { head_opts.freeze = 1; }, "Force a frozen encoder mode");
  th_cmd->add_flag_callback("--no-freeze", [&] { head_opts.freeze = 0; }, "Force an unfrozen encoder mode");
  th_cmd->add_option("--lr", head_opts.learning_rate);
  th_cmd->add_option("--epochs", head_opts.epochs);
  th_cmd->add_option("--batch-size", head_opts.batch_size);
  th_cmd->add_option("--patience", head_opts.patience);
  th_cmd->add_option("--out", head_opts.out, "Head checkpoint path");
  th_cmd->callback([&] { action = [&] { return run_train_head(head_opts); }; });

  HeadEvalOptions he_opts;
  auto* he_cmd = cls_cmd->add_subcommand("eval", "Macro-F1 of a trained head");
  add_corpus_options(he_cmd, he_opts.corpus);
  add_encoder_options(he_cmd, he_opts.encoder);
  he_cmd->add_option("--head", he_opts.head)->required()->check(CLI::ExistingFile);
  he_cmd->add_option("--mode", he_opts.mode, "Recorded in the report");
  he_cmd->add_option("--split", he_opts.split, "train or validation");
  he_cmd->add_option("--threshold", he_opts.threshold);
  he_cmd->add_option("--out", he_opts.out, "Write the F1 report as JSON");
  he_cmd->callback([&] { action = [&] { return run_eval_head(he_opts); }; });

  ReportOptions rep_opts;
  auto* rep_cmd = app.add_subcommand("report", "Tables and figures under reports/<run_id>/");
  rep_cmd->add_option("--bias-report", rep_opts.bias_reports, "Report JSON from evaluate (repeatable)");
  rep_cmd->add_option("--sweep-records", rep_opts.sweep_records, "sweep_records.json");
  rep_cmd->add_option("--regenerate", rep_opts.regenerate, "Re-render a bundle from the JSON under this bundle directory");
  rep_cmd->add_option("--out", rep_opts.out);
  rep_cmd->add_option("--run-id", rep_opts.run_id);
  rep_cmd->add_option("--tsne-corpus", rep_opts.tsne_corpus, "Project validation sentences");
  rep_cmd->add_option("--tsne-category", rep_opts.tsne_category);
  rep_cmd->add_option("--split-fraction", rep_opts.split_fraction);
  rep_cmd->add_option("--seed", rep_opts.seed);
  rep_cmd->add_option("--perplexity", rep_opts.perplexity);
  rep_cmd->add_option("--iterations", rep_opts.iterations);
  add_encoder_options(rep_cmd, rep_opts.encoder);
  rep_cmd->callback([&] { action = [&] { return run_report(rep_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return action ? action() : 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
