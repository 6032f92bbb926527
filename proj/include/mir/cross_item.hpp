#pragma once

#include <random>
#include <string>
#include <vector>

#include "mir/config.hpp"
#include "mir/parameters.hpp"

namespace mir {

/// Scaled dot-product self-attention over the candidate rows of V:
///   softmax(V_h V_h^T / sqrt(d_x / heads)) V_h per head, heads concatenated.
/// Columns of masked (padding) candidates are excluded from every softmax.
Var intra_set_attention(Var V, const std::vector<bool>& mask, std::size_t heads);

/// Weights of one LSTM direction. Gates are packed [input | forget | cell | output].
struct LstmWeights {
  Var input;      // d_x x 4 d_h
  Var recurrent;  // d_h x 4 d_h
  Var bias;       // 1 x 4 d_h
};

LstmWeights lstm_weights(ParameterBinding& binding, const std::string& prefix);

void init_cross_item_parameters(ModelParameters& params, const ModelConfig& config, std::mt19937_64& rng);

// Hidden states (rows aligned with input rows) of one direction starting from
// zero hidden and cell states. With `reverse` the sequence is consumed last to first.
Var lstm_states(Var inputs, const LstmWeights& weights, std::size_t d_h, bool reverse);

/// Bidirectional encoding of the history rows H: row i is forward state i
/// concatenated with backward state i. m = 0 yields a 0 x 2 d_h matrix.
Var intra_list_encode(Var H, const LstmWeights& forward, const LstmWeights& backward, std::size_t d_h);

}  // namespace mir
