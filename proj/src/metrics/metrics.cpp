#include "mir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>

#include "mir/errors.hpp"
#include "mir/model.hpp"

namespace mir {

namespace {

double discount(std::size_t position) { return 1.0 / std::log2(static_cast<double>(position) + 1.0); }

void check_list(std::span<const std::size_t> ranking, std::size_t n, std::size_t K) {
  if (K < 1) throw ValidationError("metric cutoff K must be >= 1");
  if (ranking.size() != n) throw ShapeError("ranking length differs from label count");
  std::vector<bool> used(n, false);
  for (std::size_t i : ranking) {
    if (i >= n || used[i]) throw ValidationError("ranking is not a permutation of the candidates");
    used[i] = true;
  }
}

bool has_click(std::span<const double> labels) {
  return std::any_of(labels.begin(), labels.end(), [](double y) { return y > 0.0; });
}

// DCG of `gains` taken in ranked order, truncated at K.
double dcg(std::span<const std::size_t> ranking, std::span<const double> gains, std::size_t K) {
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(K, ranking.size()); ++r) total += gains[ranking[r]] * discount(r + 1);
  return total;
}

// DCG of the best arrangement: gains sorted in decreasing order.
double ideal_dcg(std::span<const double> gains, std::size_t K) {
  std::vector<double> sorted(gains.begin(), gains.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(K, sorted.size()); ++r) total += sorted[r] * discount(r + 1);
  return total;
}

}  // namespace

PropensityTable::PropensityTable(double p_min, double smoothing) : p_min_(p_min), smoothing_(smoothing) {
  if (!(p_min > 0.0 && p_min <= 1.0)) throw ValidationError("propensity floor must lie in (0, 1]");
  if (smoothing < 0.0) throw ValidationError("propensity smoothing must be >= 0");
}

PropensityTable PropensityTable::from_marginal(std::span<const double> by_position, double p_min) {
  PropensityTable t(p_min, 0.0);
  for (std::size_t p = 0; p < by_position.size(); ++p) t.set_marginal(p + 1, by_position[p]);
  return t;
}

double PropensityTable::clip(double v) const { return std::clamp(v, p_min_, 1.0); }

void PropensityTable::set(std::size_t category, std::size_t position, double value) {
  table_[category][position] = clip(value);
}

void PropensityTable::set_marginal(std::size_t position, double value) { marginal_[position] = clip(value); }

double PropensityTable::marginal(std::size_t position) const {
  auto it = marginal_.find(position);
  return it == marginal_.end() ? p_min_ : it->second;
}

double PropensityTable::operator()(std::size_t category, std::size_t position) const {
  auto row = table_.find(category);
  if (row != table_.end()) {
    auto it = row->second.find(position);
    if (it != row->second.end()) return it->second;
  }
  return marginal(position);
}

PropensityTable estimate_propensity(const Dataset& logs, std::size_t category_field, double p_min,
                                    double smoothing) {
  PropensityTable table(p_min, smoothing);
  std::map<std::size_t, std::map<std::size_t, double>> clicks;  // category -> position -> clicks
  std::map<std::size_t, double> all;
  std::map<std::size_t, std::set<std::size_t>> seen;
  std::set<std::size_t> all_seen;
  for (const RankingInstance& inst : logs) {
    for (const ItemRecord& c : inst.candidates) {
      if (category_field >= c.cat.size()) throw ValidationError("propensity: category field out of range");
      const std::size_t cat = c.cat[category_field];
      const auto pos = static_cast<std::size_t>(c.position);
      seen[cat].insert(pos);
      all_seen.insert(pos);
      clicks[cat][pos] += c.label;
      all[pos] += c.label;
    }
  }
  const double all_first = all[1] + smoothing;
  if (all_first <= 0.0) throw ValidationError("propensity: no clicks at position 1 and no smoothing");
  for (std::size_t pos : all_seen) table.set_marginal(pos, (all[pos] + smoothing) / all_first);
  for (const auto& [cat, positions] : seen) {
    const double first = clicks[cat][1];
    if (first <= 0.0) continue;  // falls back to the marginal row
    for (std::size_t pos : positions) table.set(cat, pos, (clicks[cat][pos] + smoothing) / (first + smoothing));
  }
  return table;
}

nlohmann::json propensity_to_json(const PropensityTable& table) {
  nlohmann::json marginal = nlohmann::json::object();
  for (const auto& [pos, v] : table.marginals()) marginal[std::to_string(pos)] = v;
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [cat, row] : table.by_category()) {
    nlohmann::json r = nlohmann::json::object();
    for (const auto& [pos, v] : row) r[std::to_string(pos)] = v;
    cats[std::to_string(cat)] = r;
  }
  return {{"p_min", table.p_min()}, {"smoothing", table.smoothing()}, {"marginal", marginal}, {"by_category", cats}};
}

std::optional<double> ndcg_at_k(std::span<const std::size_t> ranking, std::span<const double> labels, std::size_t K) {
  check_list(ranking, labels.size(), K);
  if (!has_click(labels)) return std::nullopt;
  return dcg(ranking, labels, K) / ideal_dcg(labels, K);
}

std::optional<double> map_at_k(std::span<const std::size_t> ranking, std::span<const double> labels, std::size_t K) {
  check_list(ranking, labels.size(), K);
  if (!has_click(labels)) return std::nullopt;
  double hits = 0.0, total = 0.0, clicks = 0.0;
  for (double y : labels) clicks += y;
  for (std::size_t r = 0; r < std::min(K, ranking.size()); ++r) {
    if (labels[ranking[r]] <= 0.0) continue;
    hits += 1.0;
    total += hits / static_cast<double>(r + 1);
  }
  return total / std::min(clicks, static_cast<double>(K));
}

std::optional<double> dendcg_at_k(std::span<const std::size_t> ranking, std::span<const double> labels,
                                  std::span<const std::size_t> logged_positions,
                                  std::span<const std::size_t> categories, const PropensityTable& prop,
                                  std::size_t K) {
  check_list(ranking, labels.size(), K);
  if (logged_positions.size() != labels.size() || categories.size() != labels.size()) {
    throw ShapeError("dendcg_at_k: positions or categories differ in length from labels");
  }
  if (!has_click(labels)) return std::nullopt;
  std::vector<double> weighted(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) weighted[i] = labels[i] / prop(categories[i], logged_positions[i]);
  return dcg(ranking, weighted, K) / ideal_dcg(weighted, K);
}

double utility_at_k(std::span<const std::size_t> ranking, std::span<const double> labels,
                    std::span<const std::size_t> logged_positions, std::span<const std::size_t> categories,
                    const std::vector<double>* bids, const PropensityTable& prop, std::size_t K) {
  check_list(ranking, labels.size(), K);
  if (logged_positions.size() != labels.size() || categories.size() != labels.size()) {
    throw ShapeError("utility_at_k: positions or categories differ in length from labels");
  }
  if (bids && bids->size() != labels.size()) throw ShapeError("utility_at_k: bids differ in length from labels");
  double total = 0.0;
  for (std::size_t r = 0; r < std::min(K, ranking.size()); ++r) {
    const std::size_t v = ranking[r];
    if (labels[v] <= 0.0) continue;
    const double ratio = prop(categories[v], r + 1) / prop(categories[v], logged_positions[v]);
    total += ratio * labels[v] * (bids ? (*bids)[v] : 1.0);
  }
  return total;
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["K"] = report.ks;
  nlohmann::json map = nlohmann::json::object(), ndcg = map, dendcg = map, utility = map;
  for (const auto& [k, v] : report.at) {
    const std::string key = std::to_string(k);
    map[key] = v.map;
    ndcg[key] = v.ndcg;
    dendcg[key] = v.dendcg;
    utility[key] = v.utility;
  }
  j["MAP"] = map;
  j["NDCG"] = ndcg;
  j["deNDCG"] = dendcg;
  j["Utility"] = utility;
  j["lists_evaluated"] = report.lists_evaluated;
  j["lists_with_clicks"] = report.lists_with_clicks;
  return j;
}

EvalReport evaluate_rankings(const Dataset& data, const std::vector<std::vector<std::size_t>>& rankings,
                             const PropensityTable& prop, std::span<const std::size_t> ks,
                             std::size_t category_field) {
  if (rankings.size() != data.size()) throw ShapeError("evaluate: one ranking per instance required");
  if (ks.empty()) throw ValidationError("evaluate: no cutoffs requested");
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  for (std::size_t k : ks) {
    if (k < 1) throw ValidationError("evaluate: K must be >= 1");
    report.at[k] = {};
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RankingInstance& inst = data[i];
    const std::size_t n = inst.candidates.size();
    std::vector<double> labels(n), bids;
    std::vector<std::size_t> positions(n), cats(n);
    bool all_bids = n > 0;
    for (std::size_t c = 0; c < n; ++c) {
      const ItemRecord& r = inst.candidates[c];
      labels[c] = r.label;
      positions[c] = static_cast<std::size_t>(r.position);
      if (category_field >= r.cat.size()) throw ValidationError("evaluate: category field out of range");
      cats[c] = r.cat[category_field];
      all_bids = all_bids && r.bid.has_value();
    }
    if (all_bids)
      for (const ItemRecord& r : inst.candidates) bids.push_back(*r.bid);

    ++report.lists_evaluated;
    const bool clicked = has_click(labels);
    if (clicked) ++report.lists_with_clicks;
    for (std::size_t k : ks) {
      MetricValues& acc = report.at[k];
      acc.utility += utility_at_k(rankings[i], labels, positions, cats, all_bids ? &bids : nullptr, prop, k);
      if (!clicked) continue;
      acc.map += *map_at_k(rankings[i], labels, k);
      acc.ndcg += *ndcg_at_k(rankings[i], labels, k);
      acc.dendcg += *dendcg_at_k(rankings[i], labels, positions, cats, prop, k);
    }
  }
  for (auto& [k, acc] : report.at) {
    if (report.lists_with_clicks > 0) {
      const double c = static_cast<double>(report.lists_with_clicks);
      acc.map /= c;
      acc.ndcg /= c;
      acc.dendcg /= c;
    }
    if (report.lists_evaluated > 0) acc.utility /= static_cast<double>(report.lists_evaluated);
  }
  return report;
}

EvalReport evaluate_model(const Dataset& data, const ModelParameters& params, const ModelConfig& config,
                          const PropensityTable& prop, std::span<const std::size_t> ks, std::size_t category_field) {
  std::vector<std::vector<std::size_t>> rankings;
  rankings.reserve(data.size());
  for (const RankingInstance& inst : data) rankings.push_back(rerank(inst, params, config));
  return evaluate_rankings(data, rankings, prop, ks, category_field);
}

}  // namespace mir
