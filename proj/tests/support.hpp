#pragma once

#include <random>

#include "mir/config.hpp"
#include "mir/synth.hpp"
#include "mir/tensor.hpp"

namespace testing {

inline mir::Tensor random_tensor(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  mir::Tensor t(rows, cols);
  for (double& v : t.data()) v = normal(rng);
  return t;
}

// Small model over the default generator schema.
inline mir::ModelConfig small_config(std::size_t n_max = 6, std::size_t m_max = 8) {
  mir::ModelConfig c;
  c.schema = mir::SynthConfig{}.schema();
  c.n_max = n_max;
  c.m_max = m_max;
  c.d_e = 4;
  c.d_h = 5;
  c.d_a = 6;
  c.decay_hidden = 5;
  c.mlp = {8, 4};
  return c;
}

}  // namespace testing
