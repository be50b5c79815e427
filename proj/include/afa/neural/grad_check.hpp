#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "afa/neural/types.hpp"

namespace afa::nn {

struct GradCheckEntry {
  std::string name;
  double rel_error = 0.0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst_param;
  double tolerance = 0.0;
  std::vector<std::string> failing;

  bool passed() const { return failing.empty(); }
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Denominator floor for tensors whose true gradient is (near) zero.
  double norm_floor = 1e-7;
};

/// Central-difference check of every entry of every parameter.
///
/// `backward` must leave analytic gradients in each Param::grad.
/// `loss(i)` evaluates the scalar loss after parameter tensor i has been
/// perturbed; models may use i to reuse activations upstream of that tensor.
/// Per-tensor error is ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
inline GradCheckReport grad_check(const ParamRefs<double>& params, const std::function<void()>& backward,
                                  const std::function<double(std::size_t)>& loss, GradCheckOptions opt = {}) {
  zero_grads(params);
  backward();
  GradCheckReport report;
  report.tolerance = opt.tolerance;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& p = *params[t];
    Mat<double> numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& w = p.value.data()[i];
      const double saved = w;
      w = saved + opt.step;
      const double up = loss(t);
      w = saved - opt.step;
      const double down = loss(t);
      w = saved;
      numeric.data()[i] = (up - down) / (2.0 * opt.step);
    }
    GradCheckEntry e;
    e.name = p.name;
    e.analytic_norm = p.grad.norm();
    e.numeric_norm = numeric.norm();
    e.rel_error = (p.grad - numeric).norm() / std::max({e.analytic_norm, e.numeric_norm, opt.norm_floor});
    if (!(e.rel_error <= opt.tolerance)) report.failing.push_back(e.name);
    if (report.worst_param.empty() || e.rel_error > report.max_rel_error) {
      report.max_rel_error = e.rel_error;
      report.worst_param = e.name;
    }
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace afa::nn
