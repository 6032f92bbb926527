#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "mir/config.hpp"
#include "mir/dataset.hpp"
#include "mir/parameters.hpp"

namespace mir {

/// Observation propensity per (category, position), clipped to [p_min, 1].
/// Lookups for an unknown category use the all-category row; positions never
/// observed get p_min.
class PropensityTable {
 public:
  PropensityTable(double p_min = 0.05, double smoothing = 1.0);

  // Category-free table, e.g. the generator's planted bias (entry p-1 is position p).
  static PropensityTable from_marginal(std::span<const double> by_position, double p_min = 0.05);

  double operator()(std::size_t category, std::size_t position) const;
  double marginal(std::size_t position) const;

  void set(std::size_t category, std::size_t position, double value);
  void set_marginal(std::size_t position, double value);

  double p_min() const { return p_min_; }
  double smoothing() const { return smoothing_; }
  const std::map<std::size_t, std::map<std::size_t, double>>& by_category() const { return table_; }
  const std::map<std::size_t, double>& marginals() const { return marginal_; }

 private:
  double clip(double v) const;

  double p_min_;
  double smoothing_;
  std::map<std::size_t, std::map<std::size_t, double>> table_;
  std::map<std::size_t, double> marginal_;
};

/// prop(c, p) = (clicks(c, p) + s) / (clicks(c, 1) + s), clipped. Categories
/// with no click at position 1 take the all-category estimate.
PropensityTable estimate_propensity(const Dataset& logs, std::size_t category_field = 0, double p_min = 0.05,
                                    double smoothing = 1.0);

nlohmann::json propensity_to_json(const PropensityTable& table);

// `ranking[r]` is the index of the candidate placed at position r + 1. Lists
// without clicks return nullopt.
std::optional<double> ndcg_at_k(std::span<const std::size_t> ranking, std::span<const double> labels, std::size_t K);
std::optional<double> map_at_k(std::span<const std::size_t> ranking, std::span<const double> labels, std::size_t K);
std::optional<double> dendcg_at_k(std::span<const std::size_t> ranking, std::span<const double> labels,
                                  std::span<const std::size_t> logged_positions,
                                  std::span<const std::size_t> categories, const PropensityTable& prop,
                                  std::size_t K);
// Sum over the top K of prop(c, new pos) / prop(c, logged pos) * y (* bid).
double utility_at_k(std::span<const std::size_t> ranking, std::span<const double> labels,
                    std::span<const std::size_t> logged_positions, std::span<const std::size_t> categories,
                    const std::vector<double>* bids, const PropensityTable& prop, std::size_t K);

struct MetricValues {
  double map = 0.0;
  double ndcg = 0.0;
  double dendcg = 0.0;
  double utility = 0.0;
};

struct EvalReport {
  std::vector<std::size_t> ks;
  std::map<std::size_t, MetricValues> at;
  std::size_t lists_evaluated = 0;   // every list; Utility averages over these
  std::size_t lists_with_clicks = 0; // MAP, NDCG and deNDCG average over these
};

nlohmann::json report_to_json(const EvalReport& report);

// Metrics of given rankings (one per instance). Bids are used when every candidate has one.
EvalReport evaluate_rankings(const Dataset& data, const std::vector<std::vector<std::size_t>>& rankings,
                             const PropensityTable& prop, std::span<const std::size_t> ks,
                             std::size_t category_field = 0);

EvalReport evaluate_model(const Dataset& data, const ModelParameters& params, const ModelConfig& config,
                          const PropensityTable& prop, std::span<const std::size_t> ks,
                          std::size_t category_field = 0);

}  // namespace mir
