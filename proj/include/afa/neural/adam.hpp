#pragma once

#include <cmath>

#include "afa/neural/types.hpp"

namespace afa::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied as value *= 1 - lr * weight_decay
};

template <typename Scalar>
struct OptimizerState {
  AdamConfig config;
  std::vector<Mat<Scalar>> first_moment;
  std::vector<Mat<Scalar>> second_moment;
  long step = 0;

  OptimizerState() = default;
  OptimizerState(const ParamRefs<Scalar>& params, AdamConfig cfg) : config(cfg) {
    for (auto* p : params) {
      first_moment.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
      second_moment.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
};

/// One bias-corrected adaptive-moment update. Throws (naming the parameter)
/// if any gradient is non-finite; parameters are untouched in that case.
template <typename Scalar>
void adam_step(const ParamRefs<Scalar>& params, OptimizerState<Scalar>& state) {
  if (params.size() != state.first_moment.size()) throw Error("shape", "optimizer state does not match parameters");
  for (auto* p : params)
    if (!p->grad.allFinite()) throw Error("nonfinite", "non-finite gradient in parameter '" + p->name + "'");

  ++state.step;
  const auto& c = state.config;
  const Scalar b1 = static_cast<Scalar>(c.beta1), b2 = static_cast<Scalar>(c.beta2);
  const Scalar corr1 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta1, static_cast<double>(state.step)));
  const Scalar corr2 = Scalar(1) - static_cast<Scalar>(std::pow(c.beta2, static_cast<double>(state.step)));
  const Scalar lr = static_cast<Scalar>(c.learning_rate), eps = static_cast<Scalar>(c.epsilon);
  const Scalar shrink = Scalar(1) - static_cast<Scalar>(c.learning_rate * c.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = b1 * m + (Scalar(1) - b1) * p.grad;
    v = b2 * v + (Scalar(1) - b2) * p.grad.cwiseAbs2();
    if (c.weight_decay != 0.0) p.value *= shrink;
    p.value.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  }
}

}  // namespace afa::nn
