#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dcn/autodiff.hpp"
#include "dcn/model.hpp"
#include "dcn/relation.hpp"
#include "dcn/rng.hpp"

namespace dcn {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

inline constexpr double kGradCheckTol = 1e-4;
inline constexpr double kGradCheckStep = 1e-5;

// Analytic gradients vs. central finite differences, f64. `loss_fn` must
// rebuild the graph from the current parameter values on every call.
inline GradCheckResult gradcheck(const std::string& name,
                                 std::vector<Parameter<double>*> params,
                                 const std::function<double(bool)>& loss_fn) {
  // One pass with backward to populate analytic gradients.
  for (auto* p : params) p->zero_grad();
  loss_fn(true);
  std::vector<Tensor<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckResult res{name, 0.0, false};
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>& p = *params[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double orig = p.value[i];
      p.value[i] = orig + kGradCheckStep;
      double fp = loss_fn(false);
      p.value[i] = orig - kGradCheckStep;
      double fm = loss_fn(false);
      p.value[i] = orig;
      double numeric = (fp - fm) / (2.0 * kGradCheckStep);
      double a = analytic[pi][i];
      double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      res.max_rel_err = std::max(res.max_rel_err, rel);
    }
  }
  res.pass = res.max_rel_err < kGradCheckTol;
  return res;
}

// Per-layer, head, loss-composite, and full-path checks. Every result must
// pass for the suite to be green.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 42);

}  // namespace dcn
