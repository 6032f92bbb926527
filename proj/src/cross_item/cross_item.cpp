#include "mir/cross_item.hpp"

#include <cmath>

#include "mir/errors.hpp"

namespace mir {

Var intra_set_attention(Var V, const std::vector<bool>& mask, std::size_t heads) {
  const std::size_t n = V.rows();
  const std::size_t d = V.cols();
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("intra_set_attention: heads = " + std::to_string(heads) + " does not divide d_x = " +
                     std::to_string(d));
  }
  if (mask.size() != n) throw ShapeError("intra_set_attention: mask length does not match candidate rows");
  const Mask keep = Mask::columns(n, mask);
  const std::size_t width = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(width));

  std::vector<Var> outputs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var vh = heads == 1 ? V : slice_cols(V, h * width, (h + 1) * width);
    Var logits = scale(matmul(vh, transpose(vh)), inv_scale);
    outputs.push_back(matmul(softmax_rows(logits, &keep), vh));
  }
  return heads == 1 ? outputs[0] : concat_cols(outputs);
}

LstmWeights lstm_weights(ParameterBinding& binding, const std::string& prefix) {
  return {binding(prefix + ".W_x"), binding(prefix + ".W_h"), binding(prefix + ".b")};
}

void init_cross_item_parameters(ModelParameters& params, const ModelConfig& config, std::mt19937_64& rng) {
  const std::size_t d_h = config.d_h;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
  for (const char* dir : {"lstm.fwd", "lstm.bwd"}) {
    const std::string prefix(dir);
    params.add(prefix + ".W_x", uniform_init(config.d_x(), 4 * d_h, bound, rng));
    params.add(prefix + ".W_h", uniform_init(d_h, 4 * d_h, bound, rng));
    Tensor bias = uniform_init(1, 4 * d_h, bound, rng);
    for (std::size_t j = d_h; j < 2 * d_h; ++j) bias(0, j) = 1.0;
    params.add(prefix + ".b", std::move(bias));
  }
}

Var lstm_states(Var inputs, const LstmWeights& w, std::size_t d_h, bool reverse) {
  Tape& tape = *inputs.tape();
  const std::size_t m = inputs.rows();
  if (m == 0) return tape.constant(Tensor(0, d_h));
  if (w.input.rows() != inputs.cols() || w.input.cols() != 4 * d_h) {
    throw ShapeError("lstm: input weights " + w.input.value().shape_string() + " do not fit inputs " +
                     inputs.value().shape_string());
  }
  Var projected = add(matmul(inputs, w.input), w.bias);
  Var h = tape.constant(Tensor(1, d_h));
  Var c = tape.constant(Tensor(1, d_h));
  std::vector<Var> states(m);
  for (std::size_t step = 0; step < m; ++step) {
    const std::size_t row = reverse ? m - 1 - step : step;
    Var z = add(slice_rows(projected, row, row + 1), matmul(h, w.recurrent));
    Var in_gate = sigmoid(slice_cols(z, 0, d_h));
    Var forget_gate = sigmoid(slice_cols(z, d_h, 2 * d_h));
    Var candidate = tanh(slice_cols(z, 2 * d_h, 3 * d_h));
    Var out_gate = sigmoid(slice_cols(z, 3 * d_h, 4 * d_h));
    c = add(mul(forget_gate, c), mul(in_gate, candidate));
    h = mul(out_gate, tanh(c));
    states[row] = h;
  }
  return concat_rows(states);
}

Var intra_list_encode(Var H, const LstmWeights& forward, const LstmWeights& backward, std::size_t d_h) {
  if (H.rows() == 0) return H.tape()->constant(Tensor(0, 2 * d_h));
  Var parts[] = {lstm_states(H, forward, d_h, false), lstm_states(H, backward, d_h, true)};
  return concat_cols(parts);
}

}  // namespace mir
