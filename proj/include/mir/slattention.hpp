#pragma once

#include <random>
#include <vector>

#include "mir/config.hpp"
#include "mir/parameters.hpp"

namespace mir {

struct SetListRepresentations {
  Var S;  // n x 2 d_x, rows x_i ⊕ a_i
  Var L;  // m x (d_x + 2 d_h), rows x_j ⊕ q_j
};

SetListRepresentations build_representations(Var X, Var A_cross, Var H, Var Q);

// C_IA = tanh(S W_IA L^T)
Var item_affinity(Var S, Var L, Var W_IA);

// C_FA(i, j) = sum_{s,t} tanh(E_S^i W_FA (E_L^j)^T)(s, t) * W_c(s, t).
// E_S and E_L hold the per-item k x d_e stacks row-major: (n k) x d_e and (m k) x d_e.
Var feature_affinity(Var E_S, Var E_L, Var W_FA, Var W_c);

// C_A = C_IA + C_FA
Var combine_affinity(Var C_IA, Var C_FA);

/// theta_u = softplus(g(p_u)) + floor with g a two-layer leaky-ReLU network.
Var decay_rate(ParameterBinding& binding, Var user, double leaky_slope, double floor);

struct DecayTerms {
  Var d;  // 1 x m, exp(-theta t)
  Var D;  // n x m, d repeated on every row
  Var C;  // C_A + C_A ⊙ D, or C_A when decay is disabled
};

DecayTerms interest_decay(Var theta, Var intervals, Var C_A, bool use_decay);

/// Learned weights of the final attention step. Literal mode uses W_s / W_l
/// with n_max columns; equivariant mode uses W_a, W_b (keys from candidates) and W_l.
struct AttentionWeights {
  Var W_s;
  Var W_a;
  Var W_b;
  Var W_l;
};

AttentionWeights attention_weights(ParameterBinding& binding, AttentionMode mode);

struct Attended {
  Var A_S;     // n x n, padded rows zeroed
  Var A_L;     // n x m; invalid when the history is empty
  Var S_hat;   // A_S S
  Var L_hat;   // A_L L, zeros when the history is empty
};

/// Literal:     Q_S = tanh(S W_s + C (L W_l)),          Q_L = tanh(S W_s C)
/// Equivariant: Q_S = tanh(P + C (L W_l) (S W_b)^T),    Q_L = tanh(P C),  P = (S W_a)(S W_b)^T
/// A_S, A_L are row-wise softmaxes with padded candidates / history items masked out.
Attended attend(Var S, Var L, Var C, const AttentionWeights& weights, AttentionMode mode,
                const std::vector<bool>& candidate_mask, const std::vector<bool>& history_mask);

void init_slattention_parameters(ModelParameters& params, const ModelConfig& config, std::mt19937_64& rng);

}  // namespace mir
