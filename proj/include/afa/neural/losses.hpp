#pragma once

#include <algorithm>
#include <cmath>

#include "afa/neural/layers.hpp"

namespace afa::nn {

inline constexpr double kProbFloor = 1e-12;

template <typename Scalar>
struct CrossEntropy {
  Scalar loss;
  Vec<Scalar> grad_logits;  // probs - onehot(label)
  bool clamped;             // probs[label] fell below kProbFloor
};

/// Loss from an already-normalized distribution; the returned gradient is
/// with respect to the logits that produced it.
template <typename Scalar>
CrossEntropy<Scalar> cross_entropy(const Vec<Scalar>& probs, int label) {
  if (label < 0 || label >= probs.size()) throw Error("shape", "label index out of range");
  const bool clamped = probs[label] < Scalar(kProbFloor);
  const Scalar p = std::max(probs[label], Scalar(kProbFloor));
  Vec<Scalar> grad = probs;
  grad[label] -= Scalar(1);
  return {-std::log(p), std::move(grad), clamped};
}

/// Mean softmax cross-entropy over a batch of logit rows. Writes dL/dlogits.
template <typename Scalar>
Scalar softmax_cross_entropy(const Mat<Scalar>& logits, const std::vector<int>& labels, Mat<Scalar>& dlogits) {
  const Mat<Scalar> probs = softmax_rows(logits);
  dlogits.resize(logits.rows(), logits.cols());
  Scalar total = 0;
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto ce = cross_entropy<Scalar>(probs.row(r).transpose(), labels[r]);
    total += ce.loss;
    dlogits.row(r) = ce.grad_logits.transpose() * inv_b;
  }
  return total * inv_b;
}

/// Mean squared error between predictions and targets; writes dL/dpred.
template <typename Scalar>
Scalar mse(const Vec<Scalar>& pred, const Vec<Scalar>& target, Vec<Scalar>& dpred) {
  if (pred.size() != target.size()) throw Error("shape", "mse: size mismatch");
  const Vec<Scalar> diff = pred - target;
  const Scalar n = static_cast<Scalar>(pred.size());
  dpred = Scalar(2) * diff / n;
  return diff.squaredNorm() / n;
}

}  // namespace afa::nn
