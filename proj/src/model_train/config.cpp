#include "mir/config.hpp"

#include <set>

#include "mir/errors.hpp"

namespace mir {

using nlohmann::json;

std::string to_string(AttentionMode mode) { return mode == AttentionMode::literal ? "literal" : "equivariant"; }

AttentionMode parse_mode(std::string_view text) {
  if (text == "literal") return AttentionMode::literal;
  if (text == "equivariant") return AttentionMode::equivariant;
  throw ValidationError("unknown attention mode '" + std::string(text) + "' (expected literal or equivariant)");
}

void ModelConfig::validate() const {
  schema.validate();
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("config: ") + name + " must be positive");
  };
  positive(d_e, "d_e");
  positive(d_h, "d_h");
  positive(d_a, "d_a");
  positive(heads, "heads");
  positive(decay_hidden, "decay_hidden");
  positive(batch_size, "batch_size");
  positive(n_max, "n_max");
  for (std::size_t w : mlp) positive(w, "mlp width");
  if (d_x() % heads != 0) {
    throw ValidationError("config: heads = " + std::to_string(heads) + " does not divide d_x = " +
                          std::to_string(d_x()));
  }
  if (learning_rate < 0 || l2 < 0) throw ValidationError("config: learning_rate and l2 must be >= 0");
  if (!(theta_floor > 0)) throw ValidationError("config: theta_floor must be > 0");
}

void ModelConfig::apply_ablation(std::string_view code) {
  if (code == "fi") {
    flags.use_feature_affinity = false;
  } else if (code == "ii") {
    flags.use_item_affinity = false;
  } else if (code == "dcy") {
    flags.use_decay = false;
  } else if (code == "set") {
    flags.use_intra_set = false;
  } else if (code == "lst") {
    flags.use_intra_list = false;
  } else {
    throw ValidationError("unknown ablation '" + std::string(code) + "' (expected fi, ii, dcy, set or lst)");
  }
}

ModelConfig ModelConfig::full_scale(FeatureSchema schema) {
  ModelConfig c;
  c.schema = std::move(schema);
  c.d_e = 16;
  c.d_h = 64;
  c.mlp = {500, 200, 80};
  c.batch_size = 16;
  c.m_max = 30;
  return c;
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"schema", c.schema},
           {"d_e", c.d_e},
           {"d_h", c.d_h},
           {"d_a", c.d_a},
           {"heads", c.heads},
           {"decay_hidden", c.decay_hidden},
           {"mlp", c.mlp},
           {"leaky_slope", c.leaky_slope},
           {"theta_floor", c.theta_floor},
           {"learning_rate", c.learning_rate},
           {"l2", c.l2},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"seed", c.seed},
           {"n_max", c.n_max},
           {"m_max", c.m_max},
           {"mode", to_string(c.mode)},
           {"use_feature_affinity", c.flags.use_feature_affinity},
           {"use_item_affinity", c.flags.use_item_affinity},
           {"use_decay", c.flags.use_decay},
           {"use_intra_set", c.flags.use_intra_set},
           {"use_intra_list", c.flags.use_intra_list},
           {"standardize_dense", c.standardize_dense}};
}

void merge_json(const json& j, ModelConfig& c) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  json defaults;
  to_json(defaults, c);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!defaults.contains(it.key())) throw ValidationError("config: unknown field '" + it.key() + "'");
  try {
    if (j.contains("schema")) c.schema = j.at("schema").get<FeatureSchema>();
    c.d_e = j.value("d_e", c.d_e);
    c.d_h = j.value("d_h", c.d_h);
    c.d_a = j.value("d_a", c.d_a);
    c.heads = j.value("heads", c.heads);
    c.decay_hidden = j.value("decay_hidden", c.decay_hidden);
    c.mlp = j.value("mlp", c.mlp);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.theta_floor = j.value("theta_floor", c.theta_floor);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.l2 = j.value("l2", c.l2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.n_max = j.value("n_max", c.n_max);
    c.m_max = j.value("m_max", c.m_max);
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.flags.use_feature_affinity = j.value("use_feature_affinity", c.flags.use_feature_affinity);
    c.flags.use_item_affinity = j.value("use_item_affinity", c.flags.use_item_affinity);
    c.flags.use_decay = j.value("use_decay", c.flags.use_decay);
    c.flags.use_intra_set = j.value("use_intra_set", c.flags.use_intra_set);
    c.flags.use_intra_list = j.value("use_intra_list", c.flags.use_intra_list);
    c.standardize_dense = j.value("standardize_dense", c.standardize_dense);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

void from_json(const json& j, ModelConfig& c) {
  c = ModelConfig{};
  merge_json(j, c);
}

void check_compatible(const ModelConfig& stored, const ModelConfig& expected) {
  auto differ = [](const std::string& what, const std::string& a, const std::string& b) {
    throw ValidationError("checkpoint " + what + " = " + a + " but config expects " + b);
  };
  auto num = [](std::size_t v) { return std::to_string(v); };
  if (stored.schema.k() != expected.schema.k()) differ("k", num(stored.schema.k()), num(expected.schema.k()));
  if (stored.schema.vocab_sizes != expected.schema.vocab_sizes) {
    differ("vocab_sizes", json(stored.schema.vocab_sizes).dump(), json(expected.schema.vocab_sizes).dump());
  }
  if (stored.schema.dense_dim != expected.schema.dense_dim) {
    differ("dense_dim", num(stored.schema.dense_dim), num(expected.schema.dense_dim));
  }
  if (stored.schema.user_vocab_sizes != expected.schema.user_vocab_sizes) {
    differ("user_vocab_sizes", json(stored.schema.user_vocab_sizes).dump(),
           json(expected.schema.user_vocab_sizes).dump());
  }
  if (stored.d_e != expected.d_e) differ("d_e", num(stored.d_e), num(expected.d_e));
  if (stored.d_h != expected.d_h) differ("d_h", num(stored.d_h), num(expected.d_h));
  if (stored.mode != expected.mode) differ("mode", to_string(stored.mode), to_string(expected.mode));
  if (stored.attention_width() != expected.attention_width()) {
    differ("attention width", num(stored.attention_width()), num(expected.attention_width()));
  }
  if (stored.decay_hidden != expected.decay_hidden) {
    differ("decay_hidden", num(stored.decay_hidden), num(expected.decay_hidden));
  }
  if (stored.mlp != expected.mlp) differ("mlp", json(stored.mlp).dump(), json(expected.mlp).dump());
}

}  // namespace mir
