#pragma once

#include <string>

#include "mir/config.hpp"
#include "mir/parameters.hpp"

namespace mir {

/// Binary layout (little-endian):
///   "MIRCKPT1", u32 version, u64 length + config JSON,
///   u64 tensor count, then per tensor: u32 name length + name, u32 rank,
///   u32 dims..., f64 values.
/// Adam moments are stored as "adam.m/<name>" and "adam.v/<name>", the step as "adam.step".
struct Checkpoint {
  ModelConfig config;
  ModelParameters params;
};

std::string serialize_checkpoint(const ModelParameters& params, const ModelConfig& config);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParameters& params, const ModelConfig& config, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
// Loads and rejects a checkpoint whose config is incompatible with `expected`.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

}  // namespace mir
