#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mir/config.hpp"
#include "mir/dataset.hpp"
#include "mir/parameters.hpp"

namespace mir {

struct PermutationTrial {
  std::size_t instance = 0;
  std::vector<std::size_t> permutation;  // row i of the permuted input is row permutation[i]
  double max_deviation = 0.0;
  bool sequence_equal = true;
};

struct InvarianceReport {
  std::string mode;  // "literal", "equivariant" or "function"
  std::vector<PermutationTrial> trials;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  bool sequences_equal = true;
  bool passed = true;
};

nlohmann::json invariance_to_json(const InvarianceReport& report, bool include_trials = false);

// Uniformly random permutation of 0..n-1.
std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng);
// Rows of `x` reordered: out row i = x row perm[i].
Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm);

using RowFunction = std::function<Tensor(const Tensor&)>;

/// Checks f(pi X) = pi f(X) for `trials` random permutations of every input.
/// `f` must keep the row count.
InvarianceReport check_equivariance(const RowFunction& f, const std::vector<Tensor>& inputs, std::size_t trials,
                                    std::uint64_t seed, double tolerance);

/// Shuffles the candidates of every instance and compares the reranked item
/// sequence and per-item scores against the unshuffled run.
InvarianceReport check_invariance(const ModelParameters& params, const ModelConfig& config,
                                  const Dataset& instances, std::size_t trials, std::uint64_t seed,
                                  double tolerance);

// Random valid instance with n distinct candidates and m chronological history items.
RankingInstance random_instance(const FeatureSchema& schema, std::size_t n, std::size_t m, std::mt19937_64& rng,
                                std::int64_t user_id = 0);

}  // namespace mir
