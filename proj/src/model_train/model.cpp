#include "mir/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mir/cross_item.hpp"
#include "mir/errors.hpp"

namespace mir {

namespace {

std::string mlp_weight(std::size_t layer) { return "mlp.W" + std::to_string(layer); }
std::string mlp_bias(std::size_t layer) { return "mlp.b" + std::to_string(layer); }

std::size_t mlp_input_width(const ModelConfig& c) { return c.d_u() + 4 * c.d_x() + 2 * c.d_h; }

Var zeros(Tape& tape, std::size_t rows, std::size_t cols) { return tape.constant(Tensor(rows, cols)); }

// Extracts the leading rows x cols block of a value.
Tensor top_left(const Tensor& t, std::size_t rows, std::size_t cols) {
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = t(i, j);
  return out;
}

}  // namespace

ModelParameters init_parameters(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ModelParameters params;
  init_embedding_parameters(params, config, rng);
  init_cross_item_parameters(params, config, rng);
  init_slattention_parameters(params, config, rng);

  std::size_t width = mlp_input_width(config);
  std::vector<std::size_t> widths = config.mlp;
  widths.push_back(1);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    params.add(mlp_weight(l), uniform_init(width, widths[l], bound, rng));
    params.add(mlp_bias(l), uniform_init(1, widths[l], bound, rng));
    width = widths[l];
  }
  return params;
}

ForwardPass forward(ParameterBinding& binding, const ModelConfig& config, const PaddedInstance& p) {
  if (p.n == 0) throw ValidationError("forward: instance has no candidates");
  if (config.mode == AttentionMode::literal && p.n_max != config.n_max) {
    throw ShapeError("forward: literal mode needs instances padded to n_max = " + std::to_string(config.n_max));
  }
  Tape& tape = binding.tape();
  const AblationFlags& flags = config.flags;
  ForwardPass fp;
  fp.embedded = embed_instance(binding, config, p);
  const EmbeddedInstance& e = fp.embedded;

  if (flags.use_intra_set) {
    fp.A_cross = mask_rows(intra_set_attention(e.X, p.candidate_mask, config.heads), p.candidate_mask);
  } else {
    fp.A_cross = zeros(tape, p.n_max, config.d_x());
  }

  // The Bi-LSTM only sees real history rows so padding cannot leak into states.
  if (flags.use_intra_list && p.m > 0) {
    Var encoded = intra_list_encode(slice_rows(e.H, 0, p.m), lstm_weights(binding, "lstm.fwd"),
                                    lstm_weights(binding, "lstm.bwd"), config.d_h);
    if (p.m < p.m_max) {
      Var parts[] = {encoded, zeros(tape, p.m_max - p.m, 2 * config.d_h)};
      fp.Q = concat_rows(parts);
    } else {
      fp.Q = encoded;
    }
  } else {
    fp.Q = zeros(tape, p.m_max, 2 * config.d_h);
  }

  const SetListRepresentations rep = build_representations(e.X, fp.A_cross, e.H, fp.Q);
  fp.S = rep.S;
  fp.L = rep.L;

  fp.C_IA = flags.use_item_affinity ? item_affinity(fp.S, fp.L, binding("sla.W_IA")) : zeros(tape, p.n_max, p.m_max);
  fp.C_FA = flags.use_feature_affinity ? feature_affinity(e.E_S, e.E_L, binding("sla.W_FA"), binding("sla.W_c"))
                                       : zeros(tape, p.n_max, p.m_max);
  fp.C_A = combine_affinity(fp.C_IA, fp.C_FA);

  fp.theta = decay_rate(binding, e.user, config.leaky_slope, config.theta_floor);
  fp.decay = interest_decay(fp.theta, tape.constant(p.intervals), fp.C_A, flags.use_decay);

  fp.attention = attend(fp.S, fp.L, fp.decay.C, attention_weights(binding, config.mode), config.mode,
                        p.candidate_mask, p.history_mask);

  Var features[] = {repeat_rows(e.user, p.n_max), e.X, fp.attention.S_hat, fp.attention.L_hat};
  Var h = concat_cols(features);
  const std::size_t layers = config.mlp.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = leaky_relu(add(matmul(h, binding(mlp_weight(l))), binding(mlp_bias(l))), config.leaky_slope);
  }
  fp.logits = add(matmul(h, binding(mlp_weight(layers))), binding(mlp_bias(layers)));
  fp.scores = sigmoid(fp.logits);
  return fp;
}

Var instance_loss(ParameterBinding& binding, const ModelConfig& config, const PaddedInstance& instance) {
  const ForwardPass fp = forward(binding, config, instance);
  return bce_with_logits(fp.logits, instance.labels, instance.candidate_mask);
}

double bce_loss(std::span<const double> probabilities, std::span<const double> labels, const std::vector<bool>& keep) {
  if (probabilities.size() != labels.size() || keep.size() != labels.size()) {
    throw ShapeError("bce_loss: probabilities, labels and mask differ in length");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!keep[i]) continue;
    const double p = probabilities[i];
    if (!(p > 0.0 && p < 1.0)) {
      throw ValidationError("bce_loss: probability " + std::to_string(p) + " at position " + std::to_string(i) +
                            " is outside (0, 1)");
    }
    total -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log1p(-p);
    ++count;
  }
  if (count == 0) throw ValidationError("bce_loss: every item is masked");
  return total / static_cast<double>(count);
}

PaddedInstance pad_for(const RankingInstance& instance, const ModelConfig& config) {
  return pad_instance(instance, config.n_max, config.m_max, config.schema);
}

std::vector<double> score_padded(const PaddedInstance& instance, const ModelParameters& params,
                                 const ModelConfig& config) {
  Tape tape;
  ParameterBinding binding(tape, params);
  const ForwardPass fp = forward(binding, config, instance);
  const Tensor& s = fp.scores.value();
  return std::vector<double>(s.data().begin(), s.data().begin() + static_cast<std::ptrdiff_t>(instance.n));
}

std::vector<double> score(const RankingInstance& instance, const ModelParameters& params, const ModelConfig& config) {
  return score_padded(pad_for(instance, config), params, config);
}

std::vector<std::size_t> rank_by_scores(std::span<const double> scores, std::span<const std::int64_t> item_ids) {
  if (scores.size() != item_ids.size()) throw ShapeError("rank_by_scores: scores and ids differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return item_ids[a] < item_ids[b];
  });
  return order;
}

std::vector<std::size_t> rerank(const RankingInstance& instance, const ModelParameters& params,
                                const ModelConfig& config) {
  const std::vector<double> s = score(instance, params, config);
  std::vector<std::int64_t> ids;
  ids.reserve(instance.candidates.size());
  for (const ItemRecord& c : instance.candidates) ids.push_back(c.item_id);
  return rank_by_scores(s, ids);
}

AffinityBundle affinity_bundle(const RankingInstance& instance, const ModelParameters& params,
                               const ModelConfig& config) {
  const PaddedInstance p = pad_for(instance, config);
  Tape tape;
  ParameterBinding binding(tape, params);
  const ForwardPass fp = forward(binding, config, p);
  AffinityBundle b;
  b.C_IA = top_left(fp.C_IA.value(), p.n, p.m);
  b.C_FA = top_left(fp.C_FA.value(), p.n, p.m);
  b.C_A = top_left(fp.C_A.value(), p.n, p.m);
  b.D = top_left(fp.decay.D.value(), p.n, p.m);
  b.C = top_left(fp.decay.C.value(), p.n, p.m);
  b.A_S = top_left(fp.attention.A_S.value(), p.n, p.n);
  b.A_L = fp.attention.A_L.valid() ? top_left(fp.attention.A_L.value(), p.n, p.m) : Tensor(0, 0);
  b.theta_u = fp.theta.value().item();
  return b;
}

namespace {

nlohmann::json matrix_json(const Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::json inspect_json(const RankingInstance& instance, const ModelParameters& params,
                            const ModelConfig& config, std::size_t category_field) {
  if (category_field >= config.schema.k()) {
    throw ValidationError("inspect: category field " + std::to_string(category_field) + " >= k = " +
                          std::to_string(config.schema.k()));
  }
  const AffinityBundle b = affinity_bundle(instance, params, config);
  const std::size_t m = std::min(instance.history.size(), config.m_max);
  // Padding keeps the most recent m_max history items.
  const std::size_t first = instance.history.size() - m;

  nlohmann::json cand = nlohmann::json::array();
  for (const ItemRecord& c : instance.candidates)
    cand.push_back({{"item_id", c.item_id}, {"category", c.cat[category_field]}});
  nlohmann::json hist = nlohmann::json::array();
  for (std::size_t j = first; j < instance.history.size(); ++j) {
    const ItemRecord& h = instance.history[j];
    hist.push_back({{"item_id", h.item_id}, {"category", h.cat[category_field]}, {"t", h.time_interval}});
  }
  return {{"user_id", instance.user_id},
          {"mode", to_string(config.mode)},
          {"theta_u", b.theta_u},
          {"candidates", cand},
          {"history", hist},
          {"C_IA", matrix_json(b.C_IA)},
          {"C_FA", matrix_json(b.C_FA)},
          {"C_A", matrix_json(b.C_A)},
          {"D", matrix_json(b.D)},
          {"C", matrix_json(b.C)},
          {"A_S", matrix_json(b.A_S)},
          {"A_L", matrix_json(b.A_L)}};
}

}  // namespace mir
