#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mir/autodiff.hpp"
#include "mir/tensor.hpp"

namespace mir {

enum class ParamKind {
  trainable,
  // Embedding table whose row 0 is the padding row: held at zero, never updated.
  padded_table,
  // Non-learned state that travels with the model (e.g. dense-feature statistics).
  fixed,
};

struct Parameter {
  Tensor value;
  ParamKind kind = ParamKind::trainable;
};

struct AdamState {
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::uint64_t step = 0;
};

using Gradients = std::map<std::string, Tensor>;

/// Every tensor of the model, addressable by a unique name.
class ModelParameters {
 public:
  void add(const std::string& name, Tensor value, ParamKind kind = ParamKind::trainable);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& value(const std::string& name) { return at(name).value; }

  const std::map<std::string, Parameter>& entries() const { return entries_; }
  std::vector<std::string> names() const;
  std::size_t scalar_count() const;

  AdamState optimizer;

  bool operator==(const ModelParameters& other) const;

 private:
  std::map<std::string, Parameter> entries_;
};

/// Lazily places parameters on a tape. Trainable tensors become variables,
/// fixed ones constants.
class ParameterBinding {
 public:
  ParameterBinding(Tape& tape, const ModelParameters& params) : tape_(tape), params_(params) {}

  Var operator()(const std::string& name);
  Tape& tape() { return tape_; }
  const ModelParameters& parameters() const { return params_; }

  // Adjoints of all bound trainable tensors after tape.backward(); unbound
  // trainable tensors get zero gradients.
  Gradients gradients() const;

 private:
  Tape& tape_;
  const ModelParameters& params_;
  std::map<std::string, Var> bound_;
};

// rows x cols tensor with entries drawn from uniform(-bound, +bound).
Tensor uniform_init(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng);

// Runs the reverse pass from `loss` and returns gradients by parameter name.
Gradients backward(Var loss, ParameterBinding& binding);

}  // namespace mir
