#include "mir/parameters.hpp"

#include <stdexcept>

#include "mir/errors.hpp"

namespace mir {

void ModelParameters::add(const std::string& name, Tensor value, ParamKind kind) {
  if (!entries_.emplace(name, Parameter{std::move(value), kind}).second) {
    throw std::logic_error("duplicate parameter name: " + name);
  }
}

const Parameter& ModelParameters::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

Parameter& ModelParameters::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ModelParameters::names() const {
  std::vector<std::string> out;
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value.size();
  return n;
}

bool ModelParameters::operator==(const ModelParameters& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (const auto& [name, p] : entries_) {
    auto it = other.entries_.find(name);
    if (it == other.entries_.end() || it->second.kind != p.kind || !(it->second.value == p.value)) return false;
  }
  return optimizer.step == other.optimizer.step && optimizer.first_moment == other.optimizer.first_moment &&
         optimizer.second_moment == other.optimizer.second_moment;
}

Var ParameterBinding::operator()(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Parameter& p = params_.at(name);
  Var v = p.kind == ParamKind::fixed ? tape_.constant(p.value) : tape_.variable(p.value);
  bound_.emplace(name, v);
  return v;
}

Gradients ParameterBinding::gradients() const {
  Gradients out;
  for (const auto& [name, p] : params_.entries()) {
    if (p.kind == ParamKind::fixed) continue;
    auto it = bound_.find(name);
    if (it == bound_.end()) {
      out.emplace(name, Tensor(p.value.shape(), std::vector<double>(p.value.size(), 0.0)));
    } else {
      out.emplace(name, tape_.grad(it->second));
    }
  }
  return out;
}

Tensor uniform_init(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Gradients backward(Var loss, ParameterBinding& binding) {
  if (loss.value().size() != 1) throw ShapeError("backward: loss must be scalar, got " + loss.value().shape_string());
  binding.tape().backward(loss);
  return binding.gradients();
}

}  // namespace mir
