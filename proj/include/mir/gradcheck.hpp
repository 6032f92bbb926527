#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mir/parameters.hpp"

namespace mir {

// Records a scalar objective on the tape of `binding`.
using Objective = std::function<Var(ParameterBinding& binding)>;

struct ParameterCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  // ||g_ad - g_fd||_inf / (||g_fd||_inf + eps)
  double relative_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<ParameterCheck> parameters;
  double worst_relative_error = 0.0;
  double tolerance = 0.0;
  double step = 0.0;
  bool passed = false;
  // Set when the objective produced a non-finite value; the check stops there.
  std::string error;
};

/// Compares reverse-mode gradients of `objective` against central differences
/// for every trainable entry. Padding rows of embedding tables are frozen and
/// skipped.
GradCheckReport finite_diff_check(const Objective& objective, ModelParameters params, double step = 1e-5,
                                  double tolerance = 1e-4, double eps = 1e-8);

}  // namespace mir
