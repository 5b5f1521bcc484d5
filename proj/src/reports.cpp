#include "contrabias/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "contrabias/error.hpp"
#include "contrabias/random.hpp"

namespace contrabias {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << content;
}

template <typename Fn>
void write_stream(const fs::path& path, Fn fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  fn(out);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Row-stochastic conditional affinities with per-row bandwidth matched to
// the target perplexity.
Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Eigen::Index n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double min_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) min_d = std::min(min_d, sq_dist(i, j));
    }
    for (int it = 0; it < 100; ++it) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-(sq_dist(i, j) - min_d) * beta);
        sum += row[j];
        weighted += row[j] * (sq_dist(i, j) - min_d);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
  }
  return p;
}

std::optional<std::pair<double, double>> value_range(const Heatmap& h) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& r : h.values) {
    for (const auto& v : r) {
      if (!v) continue;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  }
  if (lo > hi) return std::nullopt;
  return std::pair{lo, hi};
}

std::string blend(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(247 + (8 - 247) * t));
  const int g = static_cast<int>(std::lround(251 + (48 - 251) * t));
  const int b = static_cast<int>(std::lround(255 + (107 - 255) * t));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string format_hyper(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void render_bias_artifacts(const std::vector<BiasReport>& reports, const ReportPaths& paths,
                           const std::string& stem);

void render_sweep_artifacts(const std::vector<TrainRunRecord>& records, const ReportPaths& paths,
                            std::vector<fs::path>* written);

void render_tsne_artifacts(const TsneProjection& projection, const ReportPaths& paths,
                           const std::string& stem) {
  write_stream(paths.figures / (stem + ".csv"), [&](std::ostream& os) { write_tsne_csv(projection, os); });
  write_text(paths.figures / (stem + ".svg"), render_tsne_svg(projection));
}

}  // namespace

ReportPaths make_report_dirs(const fs::path& base, const std::string& run_id) {
  ReportPaths p;
  p.root = base / run_id;
  p.tables = p.root / "tables";
  p.figures = p.root / "figures";
  p.json = p.root / "json";
  for (const auto& dir : {p.tables, p.figures, p.json}) fs::create_directories(dir);
  return p;
}

// --- t-SNE -------------------------------------------------------------------

Eigen::MatrixXd tsne(const Eigen::MatrixXd& points, const TsneConfig& config) {
  const Eigen::Index n = points.rows();
  if (n < 5) {
    throw Error(ErrorCode::kTooFewPoints, "t-SNE needs at least 5 points, got " + std::to_string(n));
  }
  if (!(config.perplexity > 0.0) || config.perplexity >= static_cast<double>(n)) {
    throw Error(ErrorCode::kTooFewPoints, "perplexity " + format_hyper(config.perplexity) +
                                              " requires more than " + std::to_string(n) + " points");
  }
  if (config.iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");

  const Eigen::VectorXd norms = points.rowwise().squaredNorm();
  Eigen::MatrixXd sq_dist = (-2.0 * points * points.transpose()).colwise() + norms;
  sq_dist.rowwise() += norms.transpose();
  sq_dist = sq_dist.cwiseMax(0.0);

  const Eigen::MatrixXd conditional = conditional_affinities(sq_dist, config.perplexity);
  Eigen::MatrixXd p = (conditional + conditional.transpose()) / (2.0 * static_cast<double>(n));
  p = p.cwiseMax(1e-12);
  p.diagonal().setZero();

  Rng rng(config.seed ^ 0x75E1ULL);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i, 0) = 1e-4 * rng.normal();
    y(i, 1) = 1e-4 * rng.normal();
  }
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd num(n, n);
  Eigen::MatrixXd grad(n, 2);

  for (int it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < 250 ? 0.5 : 0.8;
    const Eigen::VectorXd yn = y.rowwise().squaredNorm();
    num = (-2.0 * y * y.transpose()).colwise() + yn;
    num.rowwise() += yn.transpose();
    num = (1.0 + num.array()).inverse().matrix();
    num.diagonal().setZero();
    const double z = num.sum();
    const Eigen::MatrixXd q = (num / z).cwiseMax(1e-12);
    const Eigen::MatrixXd w = ((exaggeration * p - q).array() * num.array()).matrix();
    grad = 4.0 * (w.rowwise().sum().asDiagonal() * y - w * y);

    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0.0) == (update(i, d) > 0.0);
        gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
      }
    }
    update = momentum * update - config.learning_rate * gains.cwiseProduct(grad);
    y += update;
    y.rowwise() -= y.colwise().mean().eval();
  }
  return y;
}

json to_json(const TsneProjection& p) {
  json coords = json::array();
  for (Eigen::Index i = 0; i < p.coordinates.rows(); ++i) {
    coords.push_back({p.coordinates(i, 0), p.coordinates(i, 1)});
  }
  return {{"kind", "tsne"}, {"title", p.title}, {"labels", p.labels}, {"coordinates", coords}};
}

TsneProjection tsne_projection_from_json(const json& j) {
  TsneProjection p;
  p.title = j.value("title", std::string{});
  p.labels = j.at("labels").get<std::vector<std::string>>();
  const auto& coords = j.at("coordinates");
  p.coordinates.resize(static_cast<Eigen::Index>(coords.size()), 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    p.coordinates(static_cast<Eigen::Index>(i), 0) = coords[i].at(0).get<double>();
    p.coordinates(static_cast<Eigen::Index>(i), 1) = coords[i].at(1).get<double>();
  }
  if (p.labels.size() != coords.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "t-SNE labels and coordinates differ in length");
  }
  return p;
}

void write_tsne_csv(const TsneProjection& p, std::ostream& out) {
  out << "index,x,y,label\n";
  for (Eigen::Index i = 0; i < p.coordinates.rows(); ++i) {
    out << i << ',' << fixed(p.coordinates(i, 0), 6) << ',' << fixed(p.coordinates(i, 1), 6) << ','
        << csv_field(p.labels[static_cast<std::size_t>(i)]) << '\n';
  }
}

std::string render_tsne_svg(const TsneProjection& p) {
  constexpr double kSize = 560.0, kPad = 40.0, kLegend = 160.0;
  std::vector<std::string> classes;
  for (const auto& l : p.labels) {
    if (std::find(classes.begin(), classes.end(), l) == classes.end()) classes.push_back(l);
  }
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (p.coordinates.rows() > 0) {
    x0 = p.coordinates.col(0).minCoeff();
    x1 = p.coordinates.col(0).maxCoeff();
    y0 = p.coordinates.col(1).minCoeff();
    y1 = p.coordinates.col(1).maxCoeff();
  }
  const double sx = x1 > x0 ? (kSize - 2 * kPad) / (x1 - x0) : 1.0;
  const double sy = y1 > y0 ? (kSize - 2 * kPad) / (y1 - y0) : 1.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize + kLegend << "\" height=\""
     << kSize << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kPad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
     << xml_escape(p.title) << "</text>\n";
  for (Eigen::Index i = 0; i < p.coordinates.rows(); ++i) {
    const auto cls = std::find(classes.begin(), classes.end(), p.labels[static_cast<std::size_t>(i)]) -
                     classes.begin();
    os << "<circle cx=\"" << fixed(kPad + (p.coordinates(i, 0) - x0) * sx, 2) << "\" cy=\""
       << fixed(kSize - kPad - (p.coordinates(i, 1) - y0) * sy, 2) << "\" r=\"4\" fill=\""
       << kPalette[cls % 10] << "\" fill-opacity=\"0.8\"/>\n";
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const double y = kPad + 20.0 * static_cast<double>(c);
    os << "<circle cx=\"" << kSize + 10 << "\" cy=\"" << y << "\" r=\"5\" fill=\"" << kPalette[c % 10]
       << "\"/>\n";
    os << "<text x=\"" << kSize + 22 << "\" y=\"" << y + 4
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(classes[c]) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

TsneProjection emit_tsne(const Eigen::MatrixXd& points, const std::vector<std::string>& labels,
                         const TsneConfig& config, const ReportPaths& paths, const std::string& stem,
                         const std::string& title) {
  if (labels.size() != static_cast<std::size_t>(points.rows())) {
    throw Error(ErrorCode::kDimensionMismatch, "one label per point is required");
  }
  TsneProjection projection{title, tsne(points, config), labels};
  write_json(paths.json / (stem + ".json"), to_json(projection));
  render_tsne_artifacts(projection, paths, stem);
  return projection;
}

// --- Sweep heatmaps ------------------------------------------------------------

Heatmap sweep_heatmap(const std::vector<TrainRunRecord>& records, LossKind kind) {
  Heatmap h;
  const bool by_temperature = uses_temperature(kind);
  h.row_name = by_temperature ? "temperature" : "margin";
  h.title = std::string(to_string(kind)) + ": max validation delta_sim";
  std::set<double> rows;
  std::set<int> cols;
  for (const auto& r : records) {
    if (r.config.loss.kind != kind) continue;
    rows.insert(by_temperature ? r.config.loss.temperature : r.config.loss.margin);
    cols.insert(r.config.max_epochs);
  }
  h.rows.assign(rows.begin(), rows.end());
  h.columns.assign(cols.begin(), cols.end());
  h.values.assign(h.rows.size(), std::vector<std::optional<double>>(h.columns.size()));
  h.failures.assign(h.rows.size(), std::vector<std::string>(h.columns.size()));
  for (const auto& r : records) {
    if (r.config.loss.kind != kind) continue;
    const double hyper = by_temperature ? r.config.loss.temperature : r.config.loss.margin;
    const auto ri = static_cast<std::size_t>(std::find(h.rows.begin(), h.rows.end(), hyper) - h.rows.begin());
    const auto ci = static_cast<std::size_t>(
        std::find(h.columns.begin(), h.columns.end(), r.config.max_epochs) - h.columns.begin());
    if (r.failure) {
      h.failures[ri][ci] = *r.failure;
      continue;
    }
    const double v = r.max_validation_delta_sim();
    if (std::isfinite(v)) {
      h.values[ri][ci] = v;
    } else {
      h.failures[ri][ci] = "no finite validation delta_sim";
    }
  }
  return h;
}

void write_heatmap_csv(const Heatmap& h, std::ostream& out) {
  out << h.row_name << ",epochs,max_validation_delta_sim,failure\n";
  for (std::size_t r = 0; r < h.rows.size(); ++r) {
    for (std::size_t c = 0; c < h.columns.size(); ++c) {
      out << format_hyper(h.rows[r]) << ',' << h.columns[c] << ','
          << (h.values[r][c] ? fixed(*h.values[r][c], 6) : std::string()) << ','
          << csv_field(h.failures[r][c]) << '\n';
    }
  }
}

std::string render_heatmap_svg(const Heatmap& h) {
  constexpr double kCell = 80.0, kLeft = 110.0, kTop = 60.0;
  const double width = kLeft + kCell * static_cast<double>(h.columns.size()) + 20.0;
  const double height = kTop + kCell * static_cast<double>(h.rows.size()) + 50.0;
  const auto range = value_range(h);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << xml_escape(h.title)
     << "</text>\n";
  for (std::size_t r = 0; r < h.rows.size(); ++r) {
    const double y = kTop + kCell * static_cast<double>(r);
    os << "<text x=\"10\" y=\"" << y + kCell / 2 + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << h.row_name << "=" << format_hyper(h.rows[r]) << "</text>\n";
    for (std::size_t c = 0; c < h.columns.size(); ++c) {
      const double x = kLeft + kCell * static_cast<double>(c);
      const auto& v = h.values[r][c];
      std::string fill = "#d9d9d9";
      std::string text = "n/a";
      bool dark = false;
      if (v) {
        const double t = range && range->second > range->first
                             ? (*v - range->first) / (range->second - range->first)
                             : 1.0;
        fill = blend(t);
        text = fixed(*v, 3);
        dark = t > 0.5;
      }
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kCell
         << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
      os << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4
         << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
         << (dark ? "white" : "black") << "\">" << text << "</text>\n";
    }
  }
  const double label_y = kTop + kCell * static_cast<double>(h.rows.size()) + 20.0;
  for (std::size_t c = 0; c < h.columns.size(); ++c) {
    os << "<text x=\"" << kLeft + kCell * static_cast<double>(c) + kCell / 2 << "\" y=\"" << label_y
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << h.columns[c]
       << " epochs</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<fs::path> emit_sweep_heatmap(const std::vector<TrainRunRecord>& records,
                                         const ReportPaths& paths) {
  json j = {{"kind", "sweep"}, {"records", json::array()}};
  for (const auto& r : records) j["records"].push_back(to_json(r));
  write_json(paths.json / "sweep_records.json", j);
  std::vector<fs::path> written;
  render_sweep_artifacts(records, paths, &written);
  return written;
}

// --- Bias tables ---------------------------------------------------------------

namespace {

struct Column {
  std::string header;
  std::optional<Category> category;  // nullopt = overall
};

std::vector<Column> table_columns() {
  std::vector<Column> cols;
  for (Category c : kAllCategories) cols.push_back({std::string(display_name(c)), c});
  cols.push_back({"Overall", std::nullopt});
  return cols;
}

const ScoreCell* cell_of(const BiasReport& r, const Column& col) {
  if (!col.category) return &r.overall;
  auto it = r.per_category.find(*col.category);
  return it == r.per_category.end() ? nullptr : &it->second;
}

std::optional<double> metric_of(const BiasReport& r, const Column& col,
                                std::optional<double> ScoreCell::*field) {
  const ScoreCell* cell = cell_of(r, col);
  return cell ? cell->*field : std::nullopt;
}

bool any_skips(const std::vector<BiasReport>& reports) {
  for (const auto& r : reports) {
    if (r.overall.skip_ratio > 0.0) return true;
  }
  return false;
}

std::string metric_table_markdown(const std::vector<BiasReport>& reports,
                                  const std::vector<std::pair<std::string, std::optional<double> ScoreCell::*>>& rows,
                                  std::optional<double> ScoreCell::*bold_field, int precision) {
  const auto cols = table_columns();
  const bool skips = any_skips(reports);

  std::vector<std::optional<std::size_t>> best(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < reports.size(); ++m) {
      auto v = metric_of(reports[m], cols[c], bold_field);
      if (v && *v < lowest) {
        lowest = *v;
        best[c] = m;
      }
    }
  }

  std::ostringstream os;
  os << "| Model | Metric |";
  for (const auto& c : cols) os << ' ' << c.header << " |";
  if (skips) os << " Skip ratio |";
  os << "\n|---|---|";
  for (std::size_t c = 0; c < cols.size(); ++c) os << "---:|";
  if (skips) os << "---:|";
  os << '\n';
  for (std::size_t m = 0; m < reports.size(); ++m) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      os << "| " << (k == 0 ? reports[m].model_id : std::string()) << " | " << rows[k].first << " |";
      for (std::size_t c = 0; c < cols.size(); ++c) {
        auto v = metric_of(reports[m], cols[c], rows[k].second);
        std::string text = v ? fixed(*v, precision) : "n/a";
        if (v && rows[k].second == bold_field && best[c] == m) text = "**" + text + "**";
        os << ' ' << text << " |";
      }
      if (skips) os << ' ' << (k == 0 ? fixed(reports[m].overall.skip_ratio, 3) : std::string()) << " |";
      os << '\n';
    }
  }
  return os.str();
}

void render_bias_artifacts(const std::vector<BiasReport>& reports, const ReportPaths& paths,
                           const std::string& stem) {
  write_text(paths.tables / (stem + ".md"), bias_table_markdown(reports));
  write_text(paths.tables / (stem + "_kl.md"),
             metric_table_markdown(reports, {{"KL Bias Score", &ScoreCell::kl_score}},
                                   &ScoreCell::kl_score, 4));
  write_stream(paths.tables / (stem + ".csv"),
               [&](std::ostream& os) { write_bias_table_csv(reports, os); });
}

void render_sweep_artifacts(const std::vector<TrainRunRecord>& records, const ReportPaths& paths,
                            std::vector<fs::path>* written) {
  std::set<LossKind> kinds;
  for (const auto& r : records) kinds.insert(r.config.loss.kind);
  for (LossKind kind : kinds) {
    const Heatmap h = sweep_heatmap(records, kind);
    const std::string stem = "sweep_" + std::string(to_string(kind));
    const fs::path csv = paths.figures / (stem + ".csv");
    write_stream(csv, [&](std::ostream& os) { write_heatmap_csv(h, os); });
    write_text(paths.figures / (stem + ".svg"), render_heatmap_svg(h));
    if (written) written->push_back(csv);
  }
  write_stream(paths.tables / "sweep_epochs.csv",
               [&](std::ostream& os) { write_metrics_csv(records, os); });
}

}  // namespace

std::string bias_table_markdown(const std::vector<BiasReport>& reports) {
  return metric_table_markdown(reports,
                               {{"Stereotype Probability", &ScoreCell::stereotype_probability},
                                {"Bias Score (lower is better)", &ScoreCell::bias_score}},
                               &ScoreCell::bias_score, 3);
}

void write_bias_table_csv(const std::vector<BiasReport>& reports, std::ostream& out) {
  const auto cols = table_columns();
  out << "model,metric";
  for (const auto& c : cols) out << ',' << (c.category ? std::string(to_string(*c.category)) : "overall");
  out << ",skip_ratio\n";
  const std::pair<const char*, std::optional<double> ScoreCell::*> metrics[] = {
      {"stereotype_probability", &ScoreCell::stereotype_probability},
      {"bias_score", &ScoreCell::bias_score},
      {"kl_score", &ScoreCell::kl_score}};
  for (const auto& r : reports) {
    for (const auto& [name, field] : metrics) {
      out << csv_field(r.model_id) << ',' << name;
      for (const auto& c : cols) {
        auto v = metric_of(r, c, field);
        out << ',' << (v ? fixed(*v, 6) : std::string());
      }
      out << ',' << fixed(r.overall.skip_ratio, 6) << '\n';
    }
  }
}

void emit_bias_table(const std::vector<BiasReport>& reports, const ReportPaths& paths,
                     const std::string& stem) {
  if (reports.empty()) throw Error(ErrorCode::kInvalidArgument, "no reports to tabulate");
  json j = {{"kind", "bias_table"}, {"stem", stem}, {"reports", json::array()}};
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  write_json(paths.json / (stem + ".json"), j);
  render_bias_artifacts(reports, paths, stem);
}

int regenerate_from_json(const ReportPaths& paths) {
  if (!fs::is_directory(paths.json)) {
    throw Error(ErrorCode::kIoError, "no json directory at " + paths.json.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(paths.json)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  int written = 0;
  for (const auto& file : files) {
    std::ifstream in(file);
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object() || !j.contains("kind")) continue;
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "bias_table") {
      std::vector<BiasReport> reports;
      for (const auto& r : j.at("reports")) reports.push_back(bias_report_from_json(r));
      render_bias_artifacts(reports, paths, j.value("stem", file.stem().string()));
      written += 3;
    } else if (kind == "sweep") {
      std::vector<TrainRunRecord> records;
      for (const auto& r : j.at("records")) records.push_back(train_record_from_json(r));
      std::vector<fs::path> csvs;
      render_sweep_artifacts(records, paths, &csvs);
      written += static_cast<int>(2 * csvs.size() + 1);
    } else if (kind == "tsne") {
      render_tsne_artifacts(tsne_projection_from_json(j), paths, file.stem().string());
      written += 2;
    }
  }
  return written;
}

}  // namespace contrabias
