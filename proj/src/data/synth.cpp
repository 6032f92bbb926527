#include "mir/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mir/errors.hpp"

namespace mir {

using nlohmann::json;

FeatureSchema SynthConfig::schema() const {
  FeatureSchema s;
  s.vocab_sizes = vocab_sizes;
  s.dense_dim = dense_dim;
  s.user_vocab_sizes = user_vocab_sizes;
  return s;
}

void SynthConfig::validate() const {
  if (n == 0) throw ValidationError("synth: n must be >= 1");
  if (num_users == 0) throw ValidationError("synth: num_users must be >= 1");
  if (vocab_sizes.empty() || vocab_sizes[0] < 2) {
    throw ValidationError("synth: vocab_sizes[0] (category) needs at least one non-padding value");
  }
  if (vocab_sizes.size() > 1 && vocab_sizes[1] < 2) throw ValidationError("synth: vocab_sizes[1] must be >= 2");
  if (user_vocab_sizes.empty() || user_vocab_sizes[0] < 2) {
    throw ValidationError("synth: user_vocab_sizes[0] (decay profile) must be >= 2");
  }
  if (num_items < n) throw ValidationError("synth: num_items must be >= n");
  schema().validate();
}

void to_json(json& j, const SynthConfig& c) {
  j = json{{"num_users", c.num_users},
           {"n", c.n},
           {"m", c.m},
           {"vocab_sizes", c.vocab_sizes},
           {"user_vocab_sizes", c.user_vocab_sizes},
           {"dense_dim", c.dense_dim},
           {"num_items", c.num_items},
           {"seed", c.seed},
           {"affinity_weight", c.affinity_weight},
           {"base_logit", c.base_logit},
           {"emit_bids", c.emit_bids}};
}

void from_json(const json& j, SynthConfig& c) {
  static const std::set<std::string> known = {"num_users", "n", "m", "vocab_sizes", "user_vocab_sizes", "dense_dim",
                                              "num_items", "seed", "affinity_weight", "base_logit", "emit_bids", "k"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ValidationError("generator config: unknown field '" + it.key() + "'");
  const SynthConfig d;
  c.num_users = j.value("num_users", d.num_users);
  c.n = j.value("n", d.n);
  c.m = j.value("m", d.m);
  c.vocab_sizes = j.value("vocab_sizes", d.vocab_sizes);
  if (j.contains("k") && j.at("k").get<std::size_t>() != c.vocab_sizes.size()) {
    throw ValidationError("generator config: k disagrees with the length of vocab_sizes");
  }
  c.user_vocab_sizes = j.value("user_vocab_sizes", d.user_vocab_sizes);
  c.dense_dim = j.value("dense_dim", d.dense_dim);
  c.num_items = j.value("num_items", d.num_items);
  c.seed = j.value("seed", d.seed);
  c.affinity_weight = j.value("affinity_weight", d.affinity_weight);
  c.base_logit = j.value("base_logit", d.base_logit);
  c.emit_bids = j.value("emit_bids", d.emit_bids);
}

json truth_to_json(const SynthTruth& truth) {
  json users = json::array();
  for (const UserTruth& u : truth.users) {
    users.push_back({{"user_id", u.user_id},
                     {"long_term_preference", u.long_term_preference},
                     {"short_term_category", u.short_term_category},
                     {"decay_rate", u.decay_rate},
                     {"binge_category", u.binge_category},
                     {"decoy_category", u.decoy_category}});
  }
  return json{{"schema", truth.schema},
              {"position_bias", truth.position_bias},
              {"propensity", truth.position_bias},
              {"mean_click_probability", truth.mean_click_probability},
              {"relevance", truth.relevance},
              {"users", users}};
}

double position_bias(std::size_t position) { return 1.0 / std::log2(static_cast<double>(position) + 1.0); }

namespace {

struct CatalogItem {
  std::int64_t id;
  std::vector<std::size_t> cat;
  std::vector<double> dense;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Draws a category (1-based) from a distribution over categories 1..C.
std::size_t sample_category(std::mt19937_64& rng, const std::vector<double>& pref) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (std::size_t c = 0; c < pref.size(); ++c) {
    acc += pref[c];
    if (u < acc) return c + 1;
  }
  return pref.size();
}

}  // namespace

SynthResult synth_generate(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> gap(1.0);

  const std::size_t k = config.vocab_sizes.size();
  const std::size_t num_categories = config.vocab_sizes[0] - 1;

  std::vector<CatalogItem> catalog;
  std::vector<std::vector<std::size_t>> by_category(num_categories + 1);
  for (std::size_t i = 0; i < config.num_items; ++i) {
    CatalogItem item;
    item.id = static_cast<std::int64_t>(i + 1);
    item.cat.resize(k);
    item.cat[0] = 1 + uniform_index(rng, num_categories);
    for (std::size_t f = 1; f < k; ++f) {
      const std::size_t v = config.vocab_sizes[f];
      item.cat[f] = 1 + uniform_index(rng, v - 1);
    }
    for (std::size_t f = 0; f < config.dense_dim; ++f) item.dense.push_back(f == 0 ? normal(rng) : unit(rng));
    by_category[item.cat[0]].push_back(i);
    catalog.push_back(std::move(item));
  }

  // Decay rates spread geometrically from 0.05 to 3.0 over the profile-0 values.
  const std::size_t decay_types = config.user_vocab_sizes[0] - 1;
  auto decay_rate_of = [&](std::size_t v) {
    if (decay_types == 1) return 0.5;
    return 0.05 * std::pow(60.0, static_cast<double>(v - 1) / static_cast<double>(decay_types - 1));
  };

  auto draw_from_category = [&](std::size_t c) -> std::size_t {
    const auto& pool = by_category[c];
    if (pool.empty()) return uniform_index(rng, catalog.size());
    return pool[uniform_index(rng, pool.size())];
  };

  SynthResult result;
  result.truth.schema = config.schema();
  for (std::size_t p = 1; p <= config.n; ++p) result.truth.position_bias.push_back(position_bias(p));

  double click_prob_total = 0.0;
  std::size_t click_prob_count = 0;

  for (std::size_t u = 0; u < config.num_users; ++u) {
    RankingInstance inst;
    inst.user_id = static_cast<std::int64_t>(u + 1);
    inst.profile.resize(config.user_vocab_sizes.size());
    inst.profile[0] = 1 + uniform_index(rng, decay_types);
    for (std::size_t f = 1; f < inst.profile.size(); ++f) {
      const std::size_t v = config.user_vocab_sizes[f];
      inst.profile[f] = v >= 2 ? 1 + uniform_index(rng, v - 1) : 0;
    }

    UserTruth truth;
    truth.user_id = inst.user_id;
    truth.decay_rate = decay_rate_of(inst.profile[0]);
    std::vector<double> logits(num_categories);
    for (double& z : logits) z = 1.5 * normal(rng);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& z : logits) total += (z = std::exp(z - mx));
    for (double& z : logits) z /= total;
    truth.long_term_preference = logits;
    truth.short_term_category = 1 + uniform_index(rng, num_categories);

    // History, oldest first; intervals shrink towards the present.
    std::vector<double> times(config.m);
    double t = 0.5 * gap(rng);
    for (std::size_t r = 0; r < config.m; ++r) {
      times[config.m - 1 - r] = t;
      t += gap(rng);
    }
    for (std::size_t j = 0; j < config.m; ++j) {
      const double recency = static_cast<double>(config.m - 1 - j);
      const bool short_term = unit(rng) < 0.7 * std::exp(-0.35 * recency);
      const std::size_t c = short_term ? truth.short_term_category : sample_category(rng, truth.long_term_preference);
      const CatalogItem& item = catalog[draw_from_category(c)];
      ItemRecord h;
      h.item_id = item.id;
      h.cat = item.cat;
      h.dense = item.dense;
      h.time_interval = times[j];
      inst.history.push_back(std::move(h));
    }

    // Binge (adjacent pair) and decoy (separated pair) categories. Both add two
    // history items, so only their arrangement tells them apart.
    if (config.m >= 6 && num_categories >= 2) {
      truth.binge_category = 1 + uniform_index(rng, num_categories);
      truth.decoy_category = 1 + (truth.binge_category + uniform_index(rng, num_categories - 1)) % num_categories;
      std::vector<std::size_t> slots;
      while (true) {
        const std::size_t b = uniform_index(rng, config.m - 1);
        const std::size_t d1 = uniform_index(rng, config.m);
        const std::size_t d2 = uniform_index(rng, config.m);
        const auto near = [](std::size_t x, std::size_t y) { return (x > y ? x - y : y - x) <= 1; };
        if (near(d1, d2) || near(d1, b) || near(d1, b + 1) || near(d2, b) || near(d2, b + 1)) continue;
        slots = {b, b + 1, d1, d2};
        break;
      }
      for (std::size_t s = 0; s < slots.size(); ++s) {
        const CatalogItem& item = catalog[draw_from_category(s < 2 ? truth.binge_category : truth.decoy_category)];
        ItemRecord& h = inst.history[slots[s]];
        h.item_id = item.id;
        h.cat = item.cat;
        h.dense = item.dense;
      }
    }

    // Distinct candidates drawn from a preference / short-term / uniform mixture.
    std::vector<std::size_t> chosen;
    std::set<std::size_t> used;
    std::size_t attempts = 0;
    while (chosen.size() < config.n) {
      std::size_t idx;
      if (attempts++ < 50 * config.n) {
        const double mix = unit(rng);
        std::size_t c;
        if (mix < 0.35) {
          c = sample_category(rng, truth.long_term_preference);
        } else if (mix < 0.55) {
          c = truth.short_term_category;
        } else {
          c = 1 + uniform_index(rng, num_categories);
        }
        idx = draw_from_category(c);
      } else {
        idx = uniform_index(rng, catalog.size());
      }
      if (used.insert(idx).second) chosen.push_back(idx);
    }
    std::shuffle(chosen.begin(), chosen.end(), rng);

    std::vector<double> relevance;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      const CatalogItem& item = catalog[chosen[i]];
      const std::size_t c = item.cat[0];
      const double long_term = std::min(4.0, static_cast<double>(num_categories) * truth.long_term_preference[c - 1]);
      // Recency-weighted shares of the history in the candidate's category and
      // brand, and the recency-weighted mean style (dense field 1).
      double weight = 0.0, short_term = 0.0, brand = 0.0, style_mean = 0.0;
      for (const ItemRecord& h : inst.history) {
        const double w = std::exp(-truth.decay_rate * h.time_interval);
        weight += w;
        if (h.cat[0] == c) short_term += w;
        if (k > 1 && h.cat[1] == item.cat[1]) brand += w;
        if (config.dense_dim > 1) style_mean += w * h.dense[1];
      }
      if (weight > 0.0) {
        short_term /= weight;
        brand /= weight;
        style_mean /= weight;
      }
      const double style = config.dense_dim > 1 && weight > 0.0 ? 1.0 - std::abs(item.dense[1] - style_mean) : 0.0;
      const double quality = config.dense_dim > 0 ? sigmoid(2.0 * item.dense[0]) : 0.0;
      double unique = 0.0;
      if (chosen.size() > 1) {
        for (std::size_t o = 0; o < chosen.size(); ++o)
          if (o != i && catalog[chosen[o]].cat[0] != c) unique += 1.0;
        unique /= static_cast<double>(chosen.size() - 1);
      }
      const double binge = c == truth.binge_category ? 1.0 : 0.0;
      const double signal = 0.5 * long_term + 3.0 * short_term + 1.0 * brand + 0.5 * quality + 3.0 * unique +
                            3.0 * binge + 4.0 * style;
      relevance.push_back(sigmoid(config.base_logit + config.affinity_weight * signal));
    }

    for (std::size_t i = 0; i < chosen.size(); ++i) {
      const CatalogItem& item = catalog[chosen[i]];
      const std::size_t pos = i + 1;
      const double p_click = relevance[i] * position_bias(pos);
      const double draw = unit(rng);
      ItemRecord c;
      c.item_id = item.id;
      c.cat = item.cat;
      c.dense = item.dense;
      c.position = pos;
      c.label = draw < p_click ? 1 : 0;
      const double bid = 0.5 + 1.5 * unit(rng);
      if (config.emit_bids) c.bid = std::round(bid * 100.0) / 100.0;
      click_prob_total += p_click;
      ++click_prob_count;
      inst.candidates.push_back(std::move(c));
    }

    result.truth.relevance.push_back(std::move(relevance));
    result.truth.users.push_back(std::move(truth));
    result.data.push_back(std::move(inst));
  }
  result.truth.mean_click_probability = click_prob_total / static_cast<double>(click_prob_count);
  return result;
}

}  // namespace mir
