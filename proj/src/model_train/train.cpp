#include "mir/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mir/embedding.hpp"
#include "mir/errors.hpp"
#include "mir/model.hpp"

namespace mir {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;
// Keeps the shuffle stream apart from the initialization stream of the same seed.
constexpr std::uint64_t kShuffleSalt = 0x9e3779b97f4a7c15ULL;

void accumulate(Gradients& total, const Gradients& g) {
  for (const auto& [name, t] : g) {
    auto it = total.find(name);
    if (it == total.end()) {
      total.emplace(name, t);
      continue;
    }
    for (std::size_t i = 0; i < t.size(); ++i) it->second[i] += t[i];
  }
}

}  // namespace

void adam_step(ModelParameters& params, const Gradients& grads, const ModelConfig& config) {
  AdamState& st = params.optimizer;
  st.step += 1;
  const double t = static_cast<double>(st.step);
  const double bias1 = 1.0 - std::pow(kBeta1, t);
  const double bias2 = 1.0 - std::pow(kBeta2, t);
  const double lr = config.learning_rate;

  for (const auto& [name, g] : grads) {
    Parameter& p = params.at(name);
    if (p.kind == ParamKind::fixed) continue;
    Tensor& w = p.value;
    if (!g.same_shape(w)) throw ShapeError("adam_step: gradient shape mismatch for " + name);
    auto m_it = st.first_moment.try_emplace(name, Tensor(w.shape(), std::vector<double>(w.size(), 0.0))).first;
    auto v_it = st.second_moment.try_emplace(name, Tensor(w.shape(), std::vector<double>(w.size(), 0.0))).first;
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    // Row 0 of a padded table is the padding row and never moves.
    const std::size_t skip = p.kind == ParamKind::padded_table ? w.cols() : 0;
    for (std::size_t i = skip; i < w.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      w[i] -= lr * (m_hat / (std::sqrt(v_hat) + kEpsilon) + config.l2 * w[i]);
    }
  }
}

std::pair<Tensor, Tensor> dense_statistics(const Dataset& data, std::size_t dense_dim) {
  std::vector<double> sum(dense_dim, 0.0), sq(dense_dim, 0.0);
  std::size_t count = 0;
  auto visit = [&](const ItemRecord& r) {
    for (std::size_t d = 0; d < dense_dim; ++d) {
      sum[d] += r.dense[d];
      sq[d] += r.dense[d] * r.dense[d];
    }
    ++count;
  };
  for (const RankingInstance& inst : data) {
    for (const ItemRecord& c : inst.candidates) visit(c);
    for (const ItemRecord& h : inst.history) visit(h);
  }
  Tensor mean(1, dense_dim), inv_std(1, dense_dim, 1.0);
  if (count == 0) return {mean, inv_std};
  for (std::size_t d = 0; d < dense_dim; ++d) {
    const double mu = sum[d] / static_cast<double>(count);
    const double var = std::max(0.0, sq[d] / static_cast<double>(count) - mu * mu);
    mean(0, d) = mu;
    inv_std(0, d) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return {mean, inv_std};
}

TrainResult train_from(ModelParameters params, const Dataset& data, const ModelConfig& config,
                       const EpochCallback& on_epoch) {
  if (data.empty()) throw ValidationError("train: empty training set");
  if (config.batch_size == 0) throw ValidationError("train: batch_size must be positive");
  std::vector<PaddedInstance> padded;
  padded.reserve(data.size());
  for (const RankingInstance& inst : data) padded.push_back(pad_for(inst, config));

  std::mt19937_64 rng(config.seed ^ kShuffleSalt);
  std::vector<std::size_t> order(padded.size());
  TrainResult result;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Gradients total;
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        Tape tape;
        ParameterBinding binding(tape, params);
        Var loss = instance_loss(binding, config, padded[order[b]]);
        const double value = loss.value().item();
        if (!std::isfinite(value)) {
          throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_id));
        }
        batch_loss += value;
        accumulate(total, backward(loss, binding));
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& [name, g] : total)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= scale;
      adam_step(params, total, config);
      epoch_loss += batch_loss;
    }
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(padded.size())};
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.params = std::move(params);
  return result;
}

TrainResult train(const Dataset& data, const ModelConfig& config, const EpochCallback& on_epoch) {
  ModelParameters params = init_parameters(config);
  if (config.standardize_dense) {
    auto [mean, inv_std] = dense_statistics(data, config.schema.dense_dim);
    set_dense_statistics(params, mean, inv_std);
  }
  return train_from(std::move(params), data, config, on_epoch);
}

nlohmann::json trace_to_json(const std::vector<EpochRecord>& trace, const ModelConfig& config) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord& r : trace) epochs.push_back({{"epoch", r.epoch}, {"mean_loss", r.mean_loss}});
  return {{"config", config}, {"epochs", epochs}};
}

}  // namespace mir
