#pragma once

#include <random>
#include <span>
#include <string>

#include "mir/config.hpp"
#include "mir/dataset.hpp"
#include "mir/parameters.hpp"

namespace mir {

std::string item_table_name(std::size_t field);
std::string user_table_name(std::size_t field);

// One [vocab x d_e] table per item and user field, shared by candidates and
// history. Row 0 is the zero padding row.
void init_embedding_parameters(ModelParameters& params, const ModelConfig& config, std::mt19937_64& rng);

// Per-field dense statistics used when `standardize_dense` is on.
void set_dense_statistics(ModelParameters& params, const Tensor& mean, const Tensor& inv_std);

struct ItemEmbeddings {
  Var x;      // rows x d_x: k categorical embeddings then dense features
  Var stack;  // (rows * k) x d_e: the per-item k x d_e categorical stacks, row-major
};

/// Embeds `rows` items whose categorical indices are `cat` (rows * k, row-major).
/// Only the first `real_rows` rows get dense standardization; later rows are padding.
ItemEmbeddings embed_items(ParameterBinding& binding, const ModelConfig& config, std::span<const std::size_t> cat,
                           const Tensor& dense, std::size_t real_rows);

Var embed_user(ParameterBinding& binding, const ModelConfig& config, std::span<const std::size_t> profile);

struct EmbeddedInstance {
  Var X;         // n_max x d_x
  Var H;         // m_max x d_x
  Var user;      // 1 x d_u
  Var E_S;       // (n_max * k) x d_e
  Var E_L;       // (m_max * k) x d_e
};

EmbeddedInstance embed_instance(ParameterBinding& binding, const ModelConfig& config, const PaddedInstance& instance);

// Value-level helpers.
Tensor embed_item(const ItemRecord& item, const ModelParameters& params, const ModelConfig& config);
Tensor embed_user(std::span<const std::size_t> profile, const ModelParameters& params, const ModelConfig& config);

}  // namespace mir
