#pragma once

#include <cmath>
#include <string>

#include "afa/neural/types.hpp"

namespace afa::nn {

/// y = x W + b, with W stored (in x out) and b (1 x out).
template <typename Scalar>
Mat<Scalar> dense_forward(const Mat<Scalar>& x, const Param<Scalar>& W, const Param<Scalar>& b) {
  if (x.cols() != W.value.rows() || b.value.cols() != W.value.cols())
    throw Error("shape", "dense '" + W.name + "': input has " + std::to_string(x.cols()) + " columns, expected " +
                             std::to_string(W.value.rows()));
  Mat<Scalar> y(x.rows(), W.value.cols());
  y.noalias() = x * W.value;
  y.rowwise() += b.value.row(0);
  return y;
}

/// Accumulates dW, db and returns dL/dx.
template <typename Scalar>
Mat<Scalar> dense_backward(const Mat<Scalar>& x, const Mat<Scalar>& dy, Param<Scalar>& W, Param<Scalar>& b) {
  if (dy.cols() != W.value.cols() || dy.rows() != x.rows()) throw Error("shape", "dense '" + W.name + "': bad gradient shape");
  W.grad.noalias() += x.transpose() * dy;
  b.grad.row(0) += dy.colwise().sum();
  Mat<Scalar> dx(x.rows(), x.cols());
  dx.noalias() = dy * W.value.transpose();
  return dx;
}

template <typename Scalar>
class Dense {
 public:
  struct Cache {
    Mat<Scalar> x;
  };

  Dense() = default;
  Dense(const std::string& name, int in, int out, bool bias = true)
      : W(name + ".weight", in, out), b(name + ".bias", 1, out), has_bias_(bias) {}

  void init(Initializer& init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(W.value.rows()));
    init.uniform(W, bound);
    if (has_bias_) init.uniform(b, bound);
  }

  /// `cache` may be null for inference.
  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    if (cache) cache->x = x;
    return dense_forward(x, W, b);
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& cache) {
    Mat<Scalar> dx = dense_backward(cache.x, dy, W, b);
    if (!has_bias_) b.grad.setZero();
    return dx;
  }

  void collect(ParamRefs<Scalar>& out) {
    out.push_back(&W);
    if (has_bias_) out.push_back(&b);
  }

  int in_dim() const { return static_cast<int>(W.value.rows()); }
  int out_dim() const { return static_cast<int>(W.value.cols()); }

  Param<Scalar> W;
  Param<Scalar> b;

 private:
  bool has_bias_ = true;
};

template <typename Scalar>
Mat<Scalar> relu(const Mat<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

/// Gradient through relu given the pre-activation.
template <typename Scalar>
Mat<Scalar> relu_backward(const Mat<Scalar>& pre, const Mat<Scalar>& dy) {
  return (pre.array() > Scalar(0)).select(dy, Scalar(0));
}

/// Numerically stable softmax with max subtraction.
template <typename Scalar>
Vec<Scalar> softmax(const Vec<Scalar>& v) {
  Vec<Scalar> e = (v.array() - v.maxCoeff()).exp();
  return e / e.sum();
}

/// Row-wise softmax.
template <typename Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& x) {
  Mat<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    auto e = (x.row(r).array() - x.row(r).maxCoeff()).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

template <typename Scalar>
class LayerNorm {
 public:
  struct Cache {
    Mat<Scalar> xhat;
    Vec<Scalar> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim) : gamma(name + ".gamma", 1, dim), beta(name + ".beta", 1, dim) {
    gamma.value.setOnes();
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    Mat<Scalar> xhat(x.rows(), x.cols());
    Vec<Scalar> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const Scalar mean = x.row(r).mean();
      const Scalar var = (x.row(r).array() - mean).square().mean();
      inv_std[r] = Scalar(1) / std::sqrt(var + kEps);
      xhat.row(r) = (x.row(r).array() - mean) * inv_std[r];
    }
    Mat<Scalar> y = xhat.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
    }
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& cache) {
    const auto& xhat = cache.xhat;
    gamma.grad.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    Mat<Scalar> dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    Mat<Scalar> dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      const Scalar m1 = dxhat.row(r).mean();
      const Scalar m2 = (dxhat.row(r).array() * xhat.row(r).array()).mean();
      dx.row(r) = cache.inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
    }
    return dx;
  }

  void collect(ParamRefs<Scalar>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }

  Param<Scalar> gamma;
  Param<Scalar> beta;

 private:
  static constexpr Scalar kEps = Scalar(1e-5);
};

}  // namespace afa::nn
