#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "mir/config.hpp"
#include "mir/dataset.hpp"
#include "mir/embedding.hpp"
#include "mir/parameters.hpp"
#include "mir/slattention.hpp"

namespace mir {

// Fresh parameters for `config`, drawn deterministically from config.seed.
ModelParameters init_parameters(const ModelConfig& config);

/// Every intermediate of one forward pass, recorded on the binding's tape.
struct ForwardPass {
  EmbeddedInstance embedded;
  Var A_cross;   // n_max x d_x
  Var Q;         // m_max x 2 d_h
  Var S, L;
  Var C_IA, C_FA, C_A;
  Var theta;
  DecayTerms decay;
  Attended attention;
  Var logits;    // n_max x 1
  Var scores;    // sigmoid(logits)
};

ForwardPass forward(ParameterBinding& binding, const ModelConfig& config, const PaddedInstance& instance);

// Mean BCE of one padded instance, recorded on the tape.
Var instance_loss(ParameterBinding& binding, const ModelConfig& config, const PaddedInstance& instance);

/// Negative log-likelihood averaged over kept items. Every kept probability
/// must lie strictly inside (0, 1).
double bce_loss(std::span<const double> probabilities, std::span<const double> labels, const std::vector<bool>& keep);

PaddedInstance pad_for(const RankingInstance& instance, const ModelConfig& config);

// Click probabilities of the real candidates, in input order.
std::vector<double> score(const RankingInstance& instance, const ModelParameters& params, const ModelConfig& config);
std::vector<double> score_padded(const PaddedInstance& instance, const ModelParameters& params,
                                 const ModelConfig& config);

// Indices of candidates by descending score; ties go to the smaller item id.
std::vector<std::size_t> rank_by_scores(std::span<const double> scores, std::span<const std::int64_t> item_ids);
std::vector<std::size_t> rerank(const RankingInstance& instance, const ModelParameters& params,
                                const ModelConfig& config);

/// Affinity and attention matrices of one instance restricted to real rows and columns.
struct AffinityBundle {
  Tensor C_IA, C_FA, C_A, D, C;  // n x m
  Tensor A_S;                    // n x n
  Tensor A_L;                    // n x m (0 x 0 without history)
  double theta_u = 0.0;
};

AffinityBundle affinity_bundle(const RankingInstance& instance, const ModelParameters& params,
                               const ModelConfig& config);

// Bundle as JSON with item ids and categories (field `category_field`) on the axes.
nlohmann::json inspect_json(const RankingInstance& instance, const ModelParameters& params,
                            const ModelConfig& config, std::size_t category_field = 0);

}  // namespace mir
