#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mir/dataset.hpp"

namespace mir {

enum class AttentionMode {
  // Set-to-list attention whose query weights have n_max learned columns.
  // Not permutation-equivariant end to end.
  literal,
  // Attention keys are projections of the candidates themselves, so both rows
  // and columns of A_S follow a permutation of the candidate set.
  equivariant,
};

std::string to_string(AttentionMode mode);
AttentionMode parse_mode(std::string_view text);

/// Component switches for the ablation variants.
struct AblationFlags {
  bool use_feature_affinity = true;  // off: MIR-fi
  bool use_item_affinity = true;     // off: MIR-ii
  bool use_decay = true;             // off: MIR-dcy
  bool use_intra_set = true;         // off: MIR-set
  bool use_intra_list = true;        // off: MIR-lst

  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  FeatureSchema schema;

  std::size_t d_e = 8;
  std::size_t d_h = 16;
  std::size_t d_a = 16;  // attention projection width (equivariant mode)
  std::size_t heads = 1;
  std::size_t decay_hidden = 16;
  std::vector<std::size_t> mlp = {64, 32};
  double leaky_slope = 0.01;
  double theta_floor = 1e-6;

  double learning_rate = 1e-3;
  double l2 = 1e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;

  std::size_t n_max = 10;
  std::size_t m_max = 30;
  AttentionMode mode = AttentionMode::equivariant;
  AblationFlags flags;
  bool standardize_dense = false;

  std::size_t d_x() const { return schema.k() * d_e + schema.dense_dim; }
  std::size_t d_u() const { return schema.user_vocab_sizes.size() * d_e; }
  std::size_t attention_width() const { return mode == AttentionMode::literal ? n_max : d_a; }

  void validate() const;
  // Applies one of fi | ii | dcy | set | lst.
  void apply_ablation(std::string_view code);

  // Wider layers for large logs; everything else stays at the desk defaults.
  static ModelConfig full_scale(FeatureSchema schema);
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Fields absent from `j` keep their current values in `c`; unknown fields are rejected.
void merge_json(const nlohmann::json& j, ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Throws ValidationError naming the first architectural difference.
void check_compatible(const ModelConfig& stored, const ModelConfig& expected);

}  // namespace mir
