#include "mir/properties.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mir/errors.hpp"
#include "mir/model.hpp"

namespace mir {

std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  if (perm.size() != x.rows()) throw ShapeError("permute_rows: permutation length differs from row count");
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(perm[i], j);
  return out;
}

namespace {

void finish(InvarianceReport& r) {
  r.passed = r.sequences_equal && r.max_deviation <= r.tolerance;
}

}  // namespace

InvarianceReport check_equivariance(const RowFunction& f, const std::vector<Tensor>& inputs, std::size_t trials,
                                    std::uint64_t seed, double tolerance) {
  std::mt19937_64 rng(seed);
  InvarianceReport report;
  report.mode = "function";
  report.tolerance = tolerance;
  for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
    const Tensor& x = inputs[idx];
    const Tensor base = f(x);
    if (base.rank() != 2 || base.rows() != x.rows()) {
      throw ValidationError("check_equivariance: function changed the row count from " + std::to_string(x.rows()));
    }
    for (std::size_t t = 0; t < trials; ++t) {
      PermutationTrial trial;
      trial.instance = idx;
      trial.permutation = random_permutation(x.rows(), rng);
      const Tensor permuted = f(permute_rows(x, trial.permutation));
      if (!permuted.same_shape(base)) throw ValidationError("check_equivariance: output shape depends on row order");
      trial.max_deviation = max_abs_diff(permuted, permute_rows(base, trial.permutation));
      report.max_deviation = std::max(report.max_deviation, trial.max_deviation);
      report.trials.push_back(std::move(trial));
    }
  }
  finish(report);
  return report;
}

InvarianceReport check_invariance(const ModelParameters& params, const ModelConfig& config,
                                  const Dataset& instances, std::size_t trials, std::uint64_t seed,
                                  double tolerance) {
  std::mt19937_64 rng(seed);
  InvarianceReport report;
  report.mode = to_string(config.mode);
  report.tolerance = tolerance;
  auto ranked_ids = [](const RankingInstance& inst, const std::vector<std::size_t>& order) {
    std::vector<std::int64_t> ids;
    for (std::size_t i : order) ids.push_back(inst.candidates[i].item_id);
    return ids;
  };
  for (std::size_t idx = 0; idx < instances.size(); ++idx) {
    const RankingInstance& inst = instances[idx];
    const std::vector<double> base = score(inst, params, config);
    std::vector<std::int64_t> ids;
    for (const ItemRecord& c : inst.candidates) ids.push_back(c.item_id);
    const auto base_seq = ranked_ids(inst, rank_by_scores(base, ids));
    for (std::size_t t = 0; t < trials; ++t) {
      PermutationTrial trial;
      trial.instance = idx;
      trial.permutation = random_permutation(inst.candidates.size(), rng);
      RankingInstance shuffled = inst;
      for (std::size_t i = 0; i < trial.permutation.size(); ++i)
        shuffled.candidates[i] = inst.candidates[trial.permutation[i]];
      const std::vector<double> s = score(shuffled, params, config);
      for (std::size_t i = 0; i < s.size(); ++i)
        trial.max_deviation = std::max(trial.max_deviation, std::abs(s[i] - base[trial.permutation[i]]));
      std::vector<std::int64_t> shuffled_ids;
      for (const ItemRecord& c : shuffled.candidates) shuffled_ids.push_back(c.item_id);
      trial.sequence_equal = ranked_ids(shuffled, rank_by_scores(s, shuffled_ids)) == base_seq;
      report.max_deviation = std::max(report.max_deviation, trial.max_deviation);
      report.sequences_equal = report.sequences_equal && trial.sequence_equal;
      report.trials.push_back(std::move(trial));
    }
  }
  finish(report);
  return report;
}

nlohmann::json invariance_to_json(const InvarianceReport& report, bool include_trials) {
  std::size_t mismatched = 0;
  for (const PermutationTrial& t : report.trials) mismatched += t.sequence_equal ? 0 : 1;
  nlohmann::json j = {{"mode", report.mode},
                      {"trials", report.trials.size()},
                      {"max_deviation", report.max_deviation},
                      {"tolerance", report.tolerance},
                      {"sequences_equal", report.sequences_equal},
                      {"sequence_mismatches", mismatched},
                      {"passed", report.passed}};
  if (include_trials) {
    nlohmann::json list = nlohmann::json::array();
    for (const PermutationTrial& t : report.trials) {
      list.push_back({{"instance", t.instance},
                      {"permutation", t.permutation},
                      {"max_deviation", t.max_deviation},
                      {"sequence_equal", t.sequence_equal}});
    }
    j["trial_details"] = list;
  }
  return j;
}

RankingInstance random_instance(const FeatureSchema& schema, std::size_t n, std::size_t m, std::mt19937_64& rng,
                                std::int64_t user_id) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> gap(1.0);
  auto draw_cat = [&](const std::vector<std::size_t>& vocab) {
    std::vector<std::size_t> out;
    for (std::size_t v : vocab) out.push_back(v > 1 ? std::uniform_int_distribution<std::size_t>(1, v - 1)(rng) : 0);
    return out;
  };
  auto draw_dense = [&] {
    std::vector<double> d(schema.dense_dim);
    for (double& x : d) x = normal(rng);
    return d;
  };
  RankingInstance inst;
  inst.user_id = user_id;
  inst.profile = draw_cat(schema.user_vocab_sizes);
  for (std::size_t i = 0; i < n; ++i) {
    ItemRecord c;
    c.item_id = static_cast<std::int64_t>(1000 * user_id + i + 1);
    c.cat = draw_cat(schema.vocab_sizes);
    c.dense = draw_dense();
    c.label = normal(rng) > 0.8 ? 1 : 0;
    c.position = i + 1;
    inst.candidates.push_back(std::move(c));
  }
  // Oldest first, so time intervals are non-increasing.
  std::vector<double> t(m);
  double acc = 0.0;
  for (std::size_t j = 0; j < m; ++j) t[m - 1 - j] = acc += gap(rng);
  for (std::size_t j = 0; j < m; ++j) {
    ItemRecord h;
    h.item_id = static_cast<std::int64_t>(1000 * user_id + 500 + j);
    h.cat = draw_cat(schema.vocab_sizes);
    h.dense = draw_dense();
    h.time_interval = t[j];
    inst.history.push_back(std::move(h));
  }
  return inst;
}

}  // namespace mir
