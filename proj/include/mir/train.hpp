#pragma once

#include <functional>
#include <vector>

#include "json.hpp"
#include "mir/config.hpp"
#include "mir/dataset.hpp"
#include "mir/parameters.hpp"

namespace mir {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
};

struct TrainResult {
  ModelParameters params;
  std::vector<EpochRecord> trace;
};

// Called after every epoch; useful for progress logging.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) with decoupled L2 on every
/// non-fixed parameter. The batch gradient is the mean of per-list gradients,
/// accumulated in a fixed order. A non-finite loss throws RuntimeFailure naming
/// the epoch and batch.
TrainResult train(const Dataset& data, const ModelConfig& config, const EpochCallback& on_epoch = {});

// Same, continuing from existing parameters and optimizer state.
TrainResult train_from(ModelParameters params, const Dataset& data, const ModelConfig& config,
                       const EpochCallback& on_epoch = {});

// One optimizer update with `grads` (already averaged).
void adam_step(ModelParameters& params, const Gradients& grads, const ModelConfig& config);

// Per-dimension mean and 1/std of candidate and history dense features.
std::pair<Tensor, Tensor> dense_statistics(const Dataset& data, std::size_t dense_dim);

nlohmann::json trace_to_json(const std::vector<EpochRecord>& trace, const ModelConfig& config);

}  // namespace mir
