#include "mir/embedding.hpp"

#include <cmath>
#include <vector>

#include "mir/errors.hpp"

namespace mir {

std::string item_table_name(std::size_t field) { return "emb.item." + std::to_string(field); }
std::string user_table_name(std::size_t field) { return "emb.user." + std::to_string(field); }

void init_embedding_parameters(ModelParameters& params, const ModelConfig& config, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d_e));
  auto table = [&](std::size_t vocab) {
    Tensor t = uniform_init(vocab, config.d_e, bound, rng);
    for (std::size_t j = 0; j < config.d_e; ++j) t(0, j) = 0.0;
    return t;
  };
  for (std::size_t f = 0; f < config.schema.k(); ++f)
    params.add(item_table_name(f), table(config.schema.vocab_sizes[f]), ParamKind::padded_table);
  for (std::size_t f = 0; f < config.schema.user_vocab_sizes.size(); ++f)
    params.add(user_table_name(f), table(config.schema.user_vocab_sizes[f]), ParamKind::padded_table);
  if (config.standardize_dense) {
    params.add("dense.mean", Tensor(1, config.schema.dense_dim, 0.0), ParamKind::fixed);
    params.add("dense.inv_std", Tensor(1, config.schema.dense_dim, 1.0), ParamKind::fixed);
  }
}

void set_dense_statistics(ModelParameters& params, const Tensor& mean, const Tensor& inv_std) {
  params.value("dense.mean") = mean;
  params.value("dense.inv_std") = inv_std;
}

namespace {

void check_indices(std::span<const std::size_t> cat, const std::vector<std::size_t>& vocab, const char* what) {
  const std::size_t k = vocab.size();
  for (std::size_t i = 0; i < cat.size(); ++i)
    if (cat[i] >= vocab[i % k]) {
      throw ValidationError(std::string(what) + " field " + std::to_string(i % k) + " index " +
                            std::to_string(cat[i]) + " out of vocabulary of size " + std::to_string(vocab[i % k]));
    }
}

}  // namespace

ItemEmbeddings embed_items(ParameterBinding& binding, const ModelConfig& config, std::span<const std::size_t> cat,
                           const Tensor& dense, std::size_t real_rows) {
  const std::size_t k = config.schema.k();
  const std::size_t rows = dense.rows();
  if (cat.size() != rows * k) throw ShapeError("embed_items: categorical block does not match dense rows");
  if (dense.cols() != config.schema.dense_dim) {
    throw ShapeError("embed_items: dense width " + std::to_string(dense.cols()) + " but schema expects " +
                     std::to_string(config.schema.dense_dim));
  }
  check_indices(cat, config.schema.vocab_sizes, "item");
  Tape& tape = binding.tape();

  std::vector<Var> parts;
  std::vector<std::size_t> column(rows);
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = cat[r * k + f];
    parts.push_back(gather_rows(binding(item_table_name(f)), column, true));
  }
  Var categorical = concat_cols(parts);
  Var stack = reshape(categorical, rows * k, config.d_e);

  Tensor d = dense;
  if (config.standardize_dense && binding.parameters().contains("dense.mean")) {
    const Tensor& mean = binding.parameters().value("dense.mean");
    const Tensor& inv = binding.parameters().value("dense.inv_std");
    for (std::size_t r = 0; r < real_rows && r < rows; ++r)
      for (std::size_t f = 0; f < d.cols(); ++f) d(r, f) = (d(r, f) - mean(0, f)) * inv(0, f);
  }
  Var x = categorical;
  if (config.schema.dense_dim > 0) {
    Var cols[] = {categorical, tape.constant(std::move(d))};
    x = concat_cols(cols);
  }
  return {x, stack};
}

Var embed_user(ParameterBinding& binding, const ModelConfig& config, std::span<const std::size_t> profile) {
  const auto& vocab = config.schema.user_vocab_sizes;
  if (profile.size() != vocab.size()) {
    throw ValidationError("profile has " + std::to_string(profile.size()) + " fields, schema expects " +
                          std::to_string(vocab.size()));
  }
  if (vocab.empty()) return binding.tape().constant(Tensor(1, 0));
  check_indices(profile, vocab, "profile");
  std::vector<Var> parts;
  for (std::size_t f = 0; f < vocab.size(); ++f) {
    const std::size_t idx[] = {profile[f]};
    parts.push_back(gather_rows(binding(user_table_name(f)), idx, true));
  }
  return concat_cols(parts);
}

EmbeddedInstance embed_instance(ParameterBinding& binding, const ModelConfig& config, const PaddedInstance& p) {
  ItemEmbeddings cand = embed_items(binding, config, p.candidate_cat, p.candidate_dense, p.n);
  ItemEmbeddings hist = embed_items(binding, config, p.history_cat, p.history_dense, p.m);
  return {cand.x, hist.x, embed_user(binding, config, p.profile), cand.stack, hist.stack};
}

Tensor embed_item(const ItemRecord& item, const ModelParameters& params, const ModelConfig& config) {
  Tape tape;
  ParameterBinding binding(tape, params);
  Tensor dense(1, config.schema.dense_dim);
  if (item.dense.size() != config.schema.dense_dim) throw ValidationError("item dense width does not match schema");
  for (std::size_t f = 0; f < item.dense.size(); ++f) dense(0, f) = item.dense[f];
  if (item.cat.size() != config.schema.k()) throw ValidationError("item categorical width does not match schema");
  return embed_items(binding, config, item.cat, dense, 1).x.value();
}

Tensor embed_user(std::span<const std::size_t> profile, const ModelParameters& params, const ModelConfig& config) {
  Tape tape;
  ParameterBinding binding(tape, params);
  return embed_user(binding, config, profile).value();
}

}  // namespace mir
