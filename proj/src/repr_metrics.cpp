#include "contrabias/repr_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "contrabias/error.hpp"

namespace contrabias {
namespace {

struct PairSums {
  double intra = 0.0;
  double inter = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
};

// Sum of dot products over unordered pairs of rows.
double unordered_pair_sum(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) return 0.0;
  const Eigen::VectorXd total = rows.colwise().sum().transpose();
  return 0.5 * (total.squaredNorm() - rows.rowwise().squaredNorm().sum());
}

std::size_t choose2(Eigen::Index n) {
  return n < 2 ? 0 : static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
}

void accumulate(const ContextEmbeddings& ctx, PairSums& sums) {
  sums.intra += unordered_pair_sum(ctx.stereotypes) + unordered_pair_sum(ctx.anti_stereotypes);
  sums.n_intra += choose2(ctx.stereotypes.rows()) + choose2(ctx.anti_stereotypes.rows());
  if (ctx.stereotypes.rows() > 0 && ctx.anti_stereotypes.rows() > 0) {
    sums.inter += ctx.stereotypes.colwise().sum().dot(ctx.anti_stereotypes.colwise().sum());
  }
  sums.n_inter += static_cast<std::size_t>(ctx.stereotypes.rows()) *
                  static_cast<std::size_t>(ctx.anti_stereotypes.rows());
}

SimStats finish(const PairSums& sums) {
  if (sums.n_intra == 0) throw Error(ErrorCode::kNoIntraPairs, "no same-class pair in any context");
  if (sums.n_inter == 0) throw Error(ErrorCode::kNoInterPairs, "no context has both classes");
  SimStats s;
  s.n_intra_pairs = sums.n_intra;
  s.n_inter_pairs = sums.n_inter;
  s.mu_intra = sums.intra / static_cast<double>(sums.n_intra);
  s.mu_inter = sums.inter / static_cast<double>(sums.n_inter);
  s.delta_sim = std::abs(s.mu_intra - s.mu_inter);
  return s;
}

}  // namespace

SimStats pooled_similarity(std::span<const ContextEmbeddings> contexts) {
  PairSums sums;
  for (const auto& ctx : contexts) accumulate(ctx, sums);
  return finish(sums);
}

std::vector<ContextEmbeddings> embed_contexts(const std::vector<ContextGroup>& groups,
                                              const EncoderHandle& handle) {
  std::vector<std::string> texts;
  for (const ContextGroup& g : groups) {
    for (const auto& r : g.stereotypes) texts.push_back(r.text);
    for (const auto& r : g.anti_stereotypes) texts.push_back(r.text);
  }
  if (texts.empty()) throw Error(ErrorCode::kEmptyCorpus, "no sentences to embed");
  const Eigen::MatrixXd all = embed_matrix(handle, texts);

  std::vector<ContextEmbeddings> out;
  out.reserve(groups.size());
  Eigen::Index row = 0;
  for (const ContextGroup& g : groups) {
    ContextEmbeddings ctx;
    ctx.category = g.category;
    const auto n_s = static_cast<Eigen::Index>(g.stereotypes.size());
    const auto n_a = static_cast<Eigen::Index>(g.anti_stereotypes.size());
    ctx.stereotypes = all.middleRows(row, n_s);
    ctx.anti_stereotypes = all.middleRows(row + n_s, n_a);
    row += n_s + n_a;
    out.push_back(std::move(ctx));
  }
  return out;
}

SimReport delta_sim(std::span<const ContextEmbeddings> contexts) {
  const SimStats overall = pooled_similarity(contexts);
  SimReport report;
  report.mu_intra = overall.mu_intra;
  report.mu_inter = overall.mu_inter;
  report.delta_sim = overall.delta_sim;
  report.n_intra_pairs = overall.n_intra_pairs;
  report.n_inter_pairs = overall.n_inter_pairs;
  for (Category category : kAllCategories) {
    PairSums sums;
    for (const auto& ctx : contexts) {
      if (ctx.category == category) accumulate(ctx, sums);
    }
    if (sums.n_intra > 0 && sums.n_inter > 0) report.per_category[category] = finish(sums);
  }
  return report;
}

SimReport delta_sim(const std::vector<ContextGroup>& groups, const EncoderHandle& handle) {
  const auto contexts = embed_contexts(groups, handle);
  return delta_sim(std::span<const ContextEmbeddings>(contexts));
}

std::map<std::string, BareReference> delta_sim_bare_reference() {
  using C = Category;
  return {
      {"all-MiniLM-L6-v2",
       {0.0157,
        {{C::kCaste, 0.0232}, {C::kReligion, 0.0013}, {C::kGender, 0.0205},
         {C::kDisability, 0.0199}, {C::kSocioeconomic, 0.0183}}}},
      {"bert-base-uncased",
       {0.0023,
        {{C::kCaste, 0.0033}, {C::kReligion, 0.0014}, {C::kGender, 0.0034},
         {C::kDisability, 0.0029}, {C::kSocioeconomic, 0.0019}}}},
      {"modernbert",
       {0.0031,
        {{C::kCaste, 0.0038}, {C::kReligion, 0.00008}, {C::kGender, 0.0047},
         {C::kDisability, 0.0009}, {C::kSocioeconomic, 0.0014}}}},
  };
}

nlohmann::json to_json(const SimReport& report) {
  nlohmann::json out = {{"mu_intra", report.mu_intra},
                        {"mu_inter", report.mu_inter},
                        {"delta_sim", report.delta_sim},
                        {"n_intra_pairs", report.n_intra_pairs},
                        {"n_inter_pairs", report.n_inter_pairs}};
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [category, s] : report.per_category) {
    per[std::string(to_string(category))] = {{"mu_intra", s.mu_intra},
                                             {"mu_inter", s.mu_inter},
                                             {"delta_sim", s.delta_sim},
                                             {"n_intra_pairs", s.n_intra_pairs},
                                             {"n_inter_pairs", s.n_inter_pairs}};
  }
  out["per_category"] = per;
  return out;
}

std::string format_sim_table(const SimReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %10s %10s %10s %8s %8s\n", "scope", "mu_intra",
                "mu_inter", "delta_sim", "intra", "inter");
  out << line;
  const auto row = [&](std::string_view name, double intra, double inter, double delta,
                       std::size_t ni, std::size_t nx) {
    std::snprintf(line, sizeof(line), "%-14.*s %10.4f %10.4f %10.4f %8zu %8zu\n",
                  static_cast<int>(name.size()), name.data(), intra, inter, delta, ni, nx);
    out << line;
  };
  for (Category category : kAllCategories) {
    const auto it = report.per_category.find(category);
    if (it == report.per_category.end()) continue;
    const SimStats& s = it->second;
    row(display_name(category), s.mu_intra, s.mu_inter, s.delta_sim, s.n_intra_pairs,
        s.n_inter_pairs);
  }
  row("Overall", report.mu_intra, report.mu_inter, report.delta_sim, report.n_intra_pairs,
      report.n_inter_pairs);
  return out.str();
}

}  // namespace contrabias
