#include "mir/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mir {

namespace {

double evaluate(const Objective& objective, const ModelParameters& params) {
  Tape tape;
  ParameterBinding binding(tape, params);
  return objective(binding).value().item();
}

}  // namespace

GradCheckReport finite_diff_check(const Objective& objective, ModelParameters params, double step,
                                  double tolerance, double eps) {
  GradCheckReport report;
  report.tolerance = tolerance;
  report.step = step;

  Gradients analytic;
  {
    Tape tape;
    ParameterBinding binding(tape, params);
    Var loss = objective(binding);
    if (!std::isfinite(loss.value().item())) {
      report.error = "objective is not finite at the base point";
      return report;
    }
    analytic = backward(loss, binding);
  }

  for (const std::string& name : params.names()) {
    Parameter& p = params.at(name);
    if (p.kind == ParamKind::fixed) continue;
    const Tensor& g = analytic.at(name);
    const std::size_t row_width = p.value.rank() == 2 ? p.value.cols() : p.value.size();
    const std::size_t first = p.kind == ParamKind::padded_table ? row_width : 0;

    ParameterCheck check;
    check.name = name;
    double worst_diff = 0.0;
    for (std::size_t i = first; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double plus = evaluate(objective, params);
      p.value[i] = saved - step;
      const double minus = evaluate(objective, params);
      p.value[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        report.error = "objective is not finite when perturbing " + name + "[" + std::to_string(i) + "]";
        report.parameters.push_back(check);
        return report;
      }
      const double numeric = (plus - minus) / (2.0 * step);
      worst_diff = std::max(worst_diff, std::abs(numeric - g[i]));
      check.max_abs_numeric = std::max(check.max_abs_numeric, std::abs(numeric));
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(g[i]));
      ++check.entries_checked;
    }
    check.relative_error = worst_diff / (check.max_abs_numeric + eps);
    check.passed = check.relative_error < tolerance;
    report.worst_relative_error = std::max(report.worst_relative_error, check.relative_error);
    report.parameters.push_back(check);
  }
  report.passed = std::all_of(report.parameters.begin(), report.parameters.end(),
                              [](const ParameterCheck& c) { return c.passed; });
  return report;
}

}  // namespace mir
