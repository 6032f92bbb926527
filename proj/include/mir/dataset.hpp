#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mir/tensor.hpp"

namespace mir {

/// Declares the categorical and dense inputs of items and user profiles.
/// Index 0 of every vocabulary is the padding index.
struct FeatureSchema {
  std::vector<std::size_t> vocab_sizes;  // one entry per categorical item field (k of them)
  std::size_t dense_dim = 0;
  std::vector<std::size_t> user_vocab_sizes;

  std::size_t k() const { return vocab_sizes.size(); }
  void validate() const;
  bool operator==(const FeatureSchema&) const = default;
};

void to_json(nlohmann::json& j, const FeatureSchema& s);
void from_json(const nlohmann::json& j, FeatureSchema& s);

struct ItemRecord {
  std::int64_t item_id = 0;
  std::vector<std::size_t> cat;
  std::vector<double> dense;
  int label = 0;              // candidates only
  std::size_t position = 0;   // 1-based logged position, candidates only
  double time_interval = 0;   // history only
  std::optional<double> bid;  // candidates only

  bool operator==(const ItemRecord&) const = default;
};

/// One user's reranking request.
struct RankingInstance {
  std::int64_t user_id = 0;
  std::vector<std::size_t> profile;
  std::vector<ItemRecord> candidates;  // initial ranking order
  std::vector<ItemRecord> history;     // chronological, oldest first

  bool operator==(const RankingInstance&) const = default;
};

using Dataset = std::vector<RankingInstance>;

struct LoadOptions {
  bool strict = false;         // reject unknown JSON fields
  bool chronological = true;   // history time intervals must be non-increasing
};

void validate_instance(const RankingInstance& instance, const FeatureSchema& schema, bool chronological = true);

RankingInstance instance_from_json(const nlohmann::json& j, const FeatureSchema& schema, const LoadOptions& options);
nlohmann::json instance_to_json(const RankingInstance& instance);

Dataset read_jsonl(std::istream& in, const FeatureSchema& schema, const LoadOptions& options = {});
Dataset load_jsonl(const std::string& path, const FeatureSchema& schema, const LoadOptions& options = {});
void write_jsonl(const Dataset& data, std::ostream& out);
void save_jsonl(const Dataset& data, const std::string& path);

/// An instance laid out at fixed sizes n_max x m_max. Real candidates and
/// history items occupy the leading rows; the rest carry padding index 0 and
/// zero dense values.
struct PaddedInstance {
  std::size_t n = 0, m = 0;
  std::size_t n_max = 0, m_max = 0;
  std::size_t k = 0;
  std::vector<std::size_t> candidate_cat;  // n_max * k, row-major
  Tensor candidate_dense;                  // n_max x d_dense
  std::vector<std::size_t> history_cat;    // m_max * k
  Tensor history_dense;                    // m_max x d_dense
  std::vector<std::size_t> profile;
  std::vector<bool> candidate_mask;
  std::vector<bool> history_mask;
  std::vector<double> labels;              // n_max, 0 on padding
  Tensor intervals;                        // 1 x m_max, 0 on padding
  std::vector<std::int64_t> item_ids;      // n real ids
};

struct PaddedBatch {
  std::vector<PaddedInstance> instances;
  std::vector<std::size_t> source_index;  // position of each instance in the dataset
};

// Pads one instance. Rejects n > n_max; keeps the most recent m_max history items.
PaddedInstance pad_instance(const RankingInstance& instance, std::size_t n_max, std::size_t m_max,
                            const FeatureSchema& schema);

std::vector<PaddedBatch> pad_and_batch(const Dataset& data, std::size_t n_max, std::size_t m_max,
                                       const FeatureSchema& schema, std::size_t batch_size = 0);

// Disjoint split by user id; `ratio` of the users go to the first part.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double ratio, std::uint64_t seed);

}  // namespace mir
