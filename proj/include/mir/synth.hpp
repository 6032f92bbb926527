#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mir/dataset.hpp"

namespace mir {

/// Synthetic click-log generator with known ground truth.
///
/// Item field 0 is the category, field 1 a brand, further fields are noise.
/// Dense field 0 is item quality and dense field 1 a style value in [0, 1). User profile field 0 selects the user's interest-decay
/// rate. Each user has a latent long-term category preference and a recent
/// short-term category; history is generated from both and clicks follow
///   P(click) = sigmoid(base_logit + affinity_weight * signal) * bias(pos),
///   bias(pos) = 1 / log2(pos + 1),
/// where `signal` >= 0 mixes long-term preference, the recency-weighted share of
/// history in the candidate's category and brand, closeness of the candidate's
/// style to the recency-weighted history style, item quality, within-list
/// category uniqueness and a "binge" category that appears in two adjacent
/// history slots (a decoy category appears twice, apart, and earns nothing).
/// Candidates are logged in a random order, so logged position is independent
/// of relevance.
struct SynthConfig {
  std::size_t num_users = 100;
  std::size_t n = 10;
  std::size_t m = 15;
  std::vector<std::size_t> vocab_sizes = {7, 13, 6};
  std::vector<std::size_t> user_vocab_sizes = {4, 5};
  std::size_t dense_dim = 2;
  std::size_t num_items = 300;
  std::uint64_t seed = 0;
  double affinity_weight = 2.0;
  double base_logit = -16.0;
  bool emit_bids = false;

  FeatureSchema schema() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct UserTruth {
  std::int64_t user_id = 0;
  std::vector<double> long_term_preference;  // over categories 1..V0-1
  std::size_t short_term_category = 0;
  double decay_rate = 0.0;
  // Category seen in two adjacent history slots (0 if none) and a decoy seen
  // twice in non-adjacent slots. Only the binge category raises relevance.
  std::size_t binge_category = 0;
  std::size_t decoy_category = 0;
};

struct SynthTruth {
  FeatureSchema schema;
  std::vector<double> position_bias;  // entry p-1 is bias(p)
  std::vector<UserTruth> users;
  // Relevance-only click probability (before position bias), per instance and candidate.
  std::vector<std::vector<double>> relevance;
  double mean_click_probability = 0.0;  // including position bias
};

nlohmann::json truth_to_json(const SynthTruth& truth);

struct SynthResult {
  Dataset data;
  SynthTruth truth;
};

double position_bias(std::size_t position);

SynthResult synth_generate(const SynthConfig& config);

}  // namespace mir
