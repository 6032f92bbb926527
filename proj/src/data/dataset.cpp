#include "mir/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <set>
#include <sstream>

#include "mir/errors.hpp"

namespace mir {

using nlohmann::json;

void FeatureSchema::validate() const {
  if (vocab_sizes.empty()) throw ValidationError("schema: at least one categorical item field is required");
  for (std::size_t i = 0; i < vocab_sizes.size(); ++i)
    if (vocab_sizes[i] < 1) throw ValidationError("schema: vocab_sizes[" + std::to_string(i) + "] must be >= 1");
  for (std::size_t i = 0; i < user_vocab_sizes.size(); ++i)
    if (user_vocab_sizes[i] < 1) {
      throw ValidationError("schema: user_vocab_sizes[" + std::to_string(i) + "] must be >= 1");
    }
}

void to_json(json& j, const FeatureSchema& s) {
  j = json{{"vocab_sizes", s.vocab_sizes}, {"dense_dim", s.dense_dim}, {"user_vocab_sizes", s.user_vocab_sizes}};
}

void from_json(const json& j, FeatureSchema& s) {
  s.vocab_sizes = j.at("vocab_sizes").get<std::vector<std::size_t>>();
  s.dense_dim = j.value("dense_dim", std::size_t{0});
  s.user_vocab_sizes = j.value("user_vocab_sizes", std::vector<std::size_t>{});
}

namespace {

void check_cats(const std::vector<std::size_t>& cats, const std::vector<std::size_t>& vocab, const std::string& where) {
  if (cats.size() != vocab.size()) {
    throw ValidationError(where + ": expected " + std::to_string(vocab.size()) + " categorical values, got " +
                          std::to_string(cats.size()));
  }
  for (std::size_t f = 0; f < cats.size(); ++f)
    if (cats[f] >= vocab[f]) {
      throw ValidationError(where + ": field " + std::to_string(f) + " index " + std::to_string(cats[f]) +
                            " out of vocabulary of size " + std::to_string(vocab[f]));
    }
}

void check_dense(const std::vector<double>& dense, std::size_t width, const std::string& where) {
  if (dense.size() != width) {
    throw ValidationError(where + ": expected " + std::to_string(width) + " dense values, got " +
                          std::to_string(dense.size()));
  }
  for (double v : dense)
    if (!std::isfinite(v)) throw ValidationError(where + ": dense value is not finite");
}

}  // namespace

void validate_instance(const RankingInstance& inst, const FeatureSchema& schema, bool chronological) {
  check_cats(inst.profile, schema.user_vocab_sizes, "profile");
  if (inst.candidates.empty()) throw ValidationError("instance has no candidates");
  for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
    const ItemRecord& c = inst.candidates[i];
    const std::string where = "candidates[" + std::to_string(i) + "]";
    check_cats(c.cat, schema.vocab_sizes, where + ".cat");
    check_dense(c.dense, schema.dense_dim, where + ".dense");
    if (c.label != 0 && c.label != 1) throw ValidationError(where + ".label must be 0 or 1");
    if (c.position < 1) throw ValidationError(where + ".pos must be >= 1");
    if (c.bid && (!std::isfinite(*c.bid) || *c.bid < 0)) throw ValidationError(where + ".bid must be >= 0");
  }
  for (std::size_t j = 0; j < inst.history.size(); ++j) {
    const ItemRecord& h = inst.history[j];
    const std::string where = "history[" + std::to_string(j) + "]";
    check_cats(h.cat, schema.vocab_sizes, where + ".cat");
    check_dense(h.dense, schema.dense_dim, where + ".dense");
    if (!std::isfinite(h.time_interval) || h.time_interval < 0) throw ValidationError(where + ".t must be >= 0");
    if (chronological && j > 0 && h.time_interval > inst.history[j - 1].time_interval) {
      throw ValidationError(where + ".t increases; history must be chronological (non-increasing intervals)");
    }
  }
}

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return it.key() == k; }) == known.end()) {
      throw ValidationError(where + ": unknown field '" + it.key() + "'");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

template <class T>
T get_as(const json& v, const std::string& what) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ValidationError(what + ": wrong JSON type");
  }
}

std::vector<std::size_t> get_indices(const json& v, const std::string& what) {
  if (!v.is_array()) throw ValidationError(what + ": expected an array");
  std::vector<std::size_t> out;
  for (const json& e : v) {
    if (!e.is_number_integer() || e.get<std::int64_t>() < 0) {
      throw ValidationError(what + ": indices must be non-negative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

ItemRecord item_from_json(const json& j, const FeatureSchema& schema, bool candidate, const LoadOptions& options,
                          const std::string& where) {
  if (options.strict) {
    if (candidate) {
      reject_unknown(j, {"item_id", "cat", "dense", "label", "pos", "bid"}, where);
    } else {
      reject_unknown(j, {"item_id", "cat", "dense", "t"}, where);
    }
  }
  ItemRecord r;
  r.item_id = get_as<std::int64_t>(require(j, "item_id", where), where + ".item_id");
  r.cat = get_indices(require(j, "cat", where), where + ".cat");
  if (schema.dense_dim > 0 || j.contains("dense")) {
    r.dense = get_as<std::vector<double>>(require(j, "dense", where), where + ".dense");
  }
  if (candidate) {
    r.label = get_as<int>(require(j, "label", where), where + ".label");
    const auto pos = get_as<std::int64_t>(require(j, "pos", where), where + ".pos");
    if (pos < 1) throw ValidationError(where + ".pos must be >= 1");
    r.position = static_cast<std::size_t>(pos);
    if (j.contains("bid") && !j.at("bid").is_null()) r.bid = get_as<double>(j.at("bid"), where + ".bid");
  } else {
    r.time_interval = get_as<double>(require(j, "t", where), where + ".t");
  }
  return r;
}

}  // namespace

RankingInstance instance_from_json(const json& j, const FeatureSchema& schema, const LoadOptions& options) {
  if (!j.is_object()) throw ValidationError("expected a JSON object per line");
  if (options.strict) reject_unknown(j, {"user_id", "profile", "candidates", "history"}, "instance");
  RankingInstance inst;
  inst.user_id = get_as<std::int64_t>(require(j, "user_id", "instance"), "user_id");
  inst.profile = get_indices(require(j, "profile", "instance"), "profile");
  const json& cands = require(j, "candidates", "instance");
  const json& hist = require(j, "history", "instance");
  if (!cands.is_array() || !hist.is_array()) throw ValidationError("candidates and history must be arrays");
  for (std::size_t i = 0; i < cands.size(); ++i)
    inst.candidates.push_back(item_from_json(cands[i], schema, true, options, "candidates[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < hist.size(); ++i)
    inst.history.push_back(item_from_json(hist[i], schema, false, options, "history[" + std::to_string(i) + "]"));
  validate_instance(inst, schema, options.chronological);
  return inst;
}

json instance_to_json(const RankingInstance& inst) {
  json cands = json::array();
  for (const ItemRecord& c : inst.candidates) {
    json e = {{"item_id", c.item_id}, {"cat", c.cat}, {"dense", c.dense}, {"label", c.label}, {"pos", c.position}};
    if (c.bid) e["bid"] = *c.bid;
    cands.push_back(std::move(e));
  }
  json hist = json::array();
  for (const ItemRecord& h : inst.history)
    hist.push_back({{"item_id", h.item_id}, {"cat", h.cat}, {"dense", h.dense}, {"t", h.time_interval}});
  return json{{"user_id", inst.user_id}, {"profile", inst.profile}, {"candidates", cands}, {"history", hist}};
}

Dataset read_jsonl(std::istream& in, const FeatureSchema& schema, const LoadOptions& options) {
  schema.validate();
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(instance_from_json(json::parse(line), schema, options));
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Dataset load_jsonl(const std::string& path, const FeatureSchema& schema, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path);
  return read_jsonl(in, schema, options);
}

void write_jsonl(const Dataset& data, std::ostream& out) {
  for (const RankingInstance& inst : data) out << instance_to_json(inst).dump() << '\n';
}

void save_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path);
  write_jsonl(data, out);
  if (!out) throw RuntimeFailure("write failed for " + path);
}

PaddedInstance pad_instance(const RankingInstance& inst, std::size_t n_max, std::size_t m_max,
                            const FeatureSchema& schema) {
  const std::size_t k = schema.k();
  const std::size_t d = schema.dense_dim;
  if (inst.candidates.size() > n_max) {
    throw ValidationError("instance for user " + std::to_string(inst.user_id) + " has " +
                          std::to_string(inst.candidates.size()) + " candidates, more than n_max = " +
                          std::to_string(n_max));
  }
  PaddedInstance p;
  p.n = inst.candidates.size();
  p.m = std::min(inst.history.size(), m_max);
  p.n_max = n_max;
  p.m_max = m_max;
  p.k = k;
  p.candidate_cat.assign(n_max * k, 0);
  p.candidate_dense = Tensor(n_max, d);
  p.history_cat.assign(m_max * k, 0);
  p.history_dense = Tensor(m_max, d);
  p.profile = inst.profile;
  p.candidate_mask.assign(n_max, false);
  p.history_mask.assign(m_max, false);
  p.labels.assign(n_max, 0.0);
  p.intervals = Tensor(1, m_max);
  for (std::size_t i = 0; i < p.n; ++i) {
    const ItemRecord& c = inst.candidates[i];
    std::copy(c.cat.begin(), c.cat.end(), p.candidate_cat.begin() + static_cast<std::ptrdiff_t>(i * k));
    for (std::size_t f = 0; f < d; ++f) p.candidate_dense(i, f) = c.dense[f];
    p.candidate_mask[i] = true;
    p.labels[i] = c.label;
    p.item_ids.push_back(c.item_id);
  }
  // Most recent items are at the end of a chronological history.
  const std::size_t skip = inst.history.size() - p.m;
  for (std::size_t j = 0; j < p.m; ++j) {
    const ItemRecord& h = inst.history[skip + j];
    std::copy(h.cat.begin(), h.cat.end(), p.history_cat.begin() + static_cast<std::ptrdiff_t>(j * k));
    for (std::size_t f = 0; f < d; ++f) p.history_dense(j, f) = h.dense[f];
    p.history_mask[j] = true;
    p.intervals(0, j) = h.time_interval;
  }
  return p;
}

std::vector<PaddedBatch> pad_and_batch(const Dataset& data, std::size_t n_max, std::size_t m_max,
                                       const FeatureSchema& schema, std::size_t batch_size) {
  std::vector<PaddedBatch> out;
  if (batch_size == 0) batch_size = std::max<std::size_t>(data.size(), 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i % batch_size == 0) out.emplace_back();
    out.back().instances.push_back(pad_instance(data[i], n_max, m_max, schema));
    out.back().source_index.push_back(i);
  }
  return out;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double ratio, std::uint64_t seed) {
  if (data.empty()) throw ValidationError("train_test_split: empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("train_test_split: ratio must be in (0, 1)");
  std::set<std::int64_t> unique;
  for (const auto& inst : data) unique.insert(inst.user_id);
  std::vector<std::int64_t> users(unique.begin(), unique.end());
  std::mt19937_64 rng(seed);
  std::shuffle(users.begin(), users.end(), rng);
  const auto n_first = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(users.size())));
  const std::set<std::int64_t> first(users.begin(), users.begin() + static_cast<std::ptrdiff_t>(n_first));
  std::pair<Dataset, Dataset> out;
  for (const auto& inst : data) (first.count(inst.user_id) ? out.first : out.second).push_back(inst);
  return out;
}

}  // namespace mir
