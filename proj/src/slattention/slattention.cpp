#include "mir/slattention.hpp"

#include <algorithm>
#include <cmath>

#include "mir/errors.hpp"

namespace mir {

SetListRepresentations build_representations(Var X, Var A_cross, Var H, Var Q) {
  if (X.rows() != A_cross.rows() || X.cols() != A_cross.cols()) {
    throw ShapeError("build_representations: X " + X.value().shape_string() + " vs A_cross " +
                     A_cross.value().shape_string());
  }
  if (H.rows() != Q.rows()) {
    throw ShapeError("build_representations: H " + H.value().shape_string() + " vs Q " + Q.value().shape_string());
  }
  Var s_parts[] = {X, A_cross};
  Var l_parts[] = {H, Q};
  return {concat_cols(s_parts), concat_cols(l_parts)};
}

Var item_affinity(Var S, Var L, Var W_IA) {
  if (S.cols() != W_IA.rows() || L.cols() != W_IA.cols()) {
    throw ShapeError("item_affinity: S " + S.value().shape_string() + ", W_IA " + W_IA.value().shape_string() +
                     ", L " + L.value().shape_string());
  }
  return tanh(matmul(matmul(S, W_IA), transpose(L)));
}

Var feature_affinity(Var E_S, Var E_L, Var W_FA, Var W_c) {
  const std::size_t d_e = W_FA.rows();
  if (W_FA.cols() != d_e || E_S.cols() != d_e || E_L.cols() != d_e) {
    throw ShapeError("feature_affinity: W_FA " + W_FA.value().shape_string() + " vs stacks " +
                     E_S.value().shape_string() + ", " + E_L.value().shape_string());
  }
  const std::size_t k = W_c.rows();
  if (W_c.cols() != k || k == 0 || E_S.rows() % k != 0 || E_L.rows() % k != 0) {
    throw ShapeError("feature_affinity: W_c " + W_c.value().shape_string() + " does not tile the stacks");
  }
  // Row (i k + s), column (j k + t) of the product is E_S^i(s) W_FA E_L^j(t).
  Var interactions = tanh(matmul(matmul(E_S, W_FA), transpose(E_L)));
  return block_weighted_sum(interactions, W_c);
}

Var combine_affinity(Var C_IA, Var C_FA) { return add(C_IA, C_FA); }

Var decay_rate(ParameterBinding& binding, Var user, double leaky_slope, double floor) {
  Var hidden = leaky_relu(add(matmul(user, binding("decay.W1")), binding("decay.b1")), leaky_slope);
  Var raw = add(matmul(hidden, binding("decay.W2")), binding("decay.b2"));
  Tape& tape = binding.tape();
  return add(softplus(raw), tape.constant(Tensor::scalar(floor)));
}

DecayTerms interest_decay(Var theta, Var intervals, Var C_A, bool use_decay) {
  if (intervals.rows() != 1 || intervals.cols() != C_A.cols()) {
    throw ShapeError("interest_decay: intervals " + intervals.value().shape_string() + " vs C_A " +
                     C_A.value().shape_string());
  }
  for (double t : intervals.value().data())
    if (t < 0) throw ValidationError("interest_decay: negative time interval");
  Var d = exp(neg(scale_by(theta, intervals)));
  Var D = repeat_rows(d, C_A.rows());
  Var C = use_decay ? add(C_A, mul(C_A, D)) : C_A;
  return {d, D, C};
}

AttentionWeights attention_weights(ParameterBinding& binding, AttentionMode mode) {
  AttentionWeights w;
  if (mode == AttentionMode::literal) {
    w.W_s = binding("sla.W_s");
  } else {
    w.W_a = binding("sla.W_a");
    w.W_b = binding("sla.W_b");
  }
  w.W_l = binding("sla.W_l");
  return w;
}

Attended attend(Var S, Var L, Var C, const AttentionWeights& w, AttentionMode mode,
                const std::vector<bool>& candidate_mask, const std::vector<bool>& history_mask) {
  const std::size_t n = S.rows();
  const std::size_t m = L.rows();
  if (C.rows() != n || C.cols() != m) {
    throw ShapeError("attend: C " + C.value().shape_string() + " vs n = " + std::to_string(n) +
                     ", m = " + std::to_string(m));
  }
  if (candidate_mask.size() != n || history_mask.size() != m) throw ShapeError("attend: mask sizes do not match");
  Tape& tape = *S.tape();
  const bool has_history = std::any_of(history_mask.begin(), history_mask.end(), [](bool b) { return b; });

  Var history_term;  // C (L W_l), n x d_a
  if (has_history) history_term = matmul(C, matmul(L, w.W_l));

  Var q_s_logits, q_l_logits;
  if (mode == AttentionMode::literal) {
    if (w.W_s.cols() != n) {
      throw ShapeError("attend: literal mode needs n = n_max = " + std::to_string(w.W_s.cols()) + ", got " +
                       std::to_string(n));
    }
    Var set_term = matmul(S, w.W_s);
    q_s_logits = has_history ? add(set_term, history_term) : set_term;
    if (has_history) q_l_logits = matmul(set_term, C);
  } else {
    Var keys = matmul(S, w.W_b);
    Var pair = matmul(matmul(S, w.W_a), transpose(keys));
    q_s_logits = has_history ? add(pair, matmul(history_term, transpose(keys))) : pair;
    if (has_history) q_l_logits = matmul(pair, C);
  }

  Attended out;
  const Mask set_mask = Mask::columns(n, candidate_mask);
  out.A_S = mask_rows(softmax_rows(tanh(q_s_logits), &set_mask), candidate_mask);
  out.S_hat = matmul(out.A_S, S);
  if (has_history) {
    const Mask list_mask = Mask::columns(n, history_mask);
    out.A_L = mask_rows(softmax_rows(tanh(q_l_logits), &list_mask), candidate_mask);
    out.L_hat = matmul(out.A_L, L);
  } else {
    out.L_hat = tape.constant(Tensor(n, L.cols()));
  }
  return out;
}

void init_slattention_parameters(ModelParameters& params, const ModelConfig& config, std::mt19937_64& rng) {
  const std::size_t d_x = config.d_x();
  const std::size_t set_width = 2 * d_x;
  const std::size_t list_width = d_x + 2 * config.d_h;
  const std::size_t k = config.schema.k();
  const std::size_t d_a = config.attention_width();
  auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };

  params.add("sla.W_IA", uniform_init(set_width, list_width, fan_in(set_width), rng));
  params.add("sla.W_FA", uniform_init(config.d_e, config.d_e, fan_in(config.d_e), rng));
  params.add("sla.W_c", uniform_init(k, k, fan_in(k), rng));
  if (config.mode == AttentionMode::literal) {
    params.add("sla.W_s", uniform_init(set_width, d_a, fan_in(set_width), rng));
  } else {
    params.add("sla.W_a", uniform_init(set_width, d_a, fan_in(set_width), rng));
    params.add("sla.W_b", uniform_init(set_width, d_a, fan_in(set_width), rng));
  }
  params.add("sla.W_l", uniform_init(list_width, d_a, fan_in(list_width), rng));

  const std::size_t d_u = std::max<std::size_t>(config.d_u(), 1);
  params.add("decay.W1", uniform_init(config.d_u(), config.decay_hidden, fan_in(d_u), rng));
  params.add("decay.b1", uniform_init(1, config.decay_hidden, fan_in(d_u), rng));
  params.add("decay.W2", uniform_init(config.decay_hidden, 1, fan_in(config.decay_hidden), rng));
  params.add("decay.b2", Tensor(1, 1));
}

}  // namespace mir
