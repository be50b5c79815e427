#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "afa/core.hpp"

namespace afa::nn {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Named trainable tensor. Always stored as a row-major matrix; vectors are
/// 1 x n.
template <typename Scalar>
struct Param {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat<Scalar>::Zero(rows, cols)), grad(Mat<Scalar>::Zero(rows, cols)) {}

  std::vector<int> shape() const { return {static_cast<int>(value.rows()), static_cast<int>(value.cols())}; }
  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }

  template <typename To>
  Param<To> cast() const {
    Param<To> out;
    out.name = name;
    out.value = value.template cast<To>();
    out.grad = grad.template cast<To>();
    return out;
  }
};

template <typename Scalar>
using ParamRefs = std::vector<Param<Scalar>*>;

template <typename Scalar>
void zero_grads(const ParamRefs<Scalar>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename Scalar>
std::size_t parameter_count(const ParamRefs<Scalar>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

/// Copies values between two models of identical architecture (possibly of
/// different scalar types).
template <typename To, typename From>
void copy_values(const ParamRefs<To>& dst, const ParamRefs<From>& src) {
  if (dst.size() != src.size()) throw Error("shape", "parameter lists differ in length");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->value.rows() != src[i]->value.rows() || dst[i]->value.cols() != src[i]->value.cols())
      throw Error("shape", "parameter '" + dst[i]->name + "' shape mismatch");
    dst[i]->value = src[i]->value.template cast<To>();
  }
}

/// Seeded initializer. Draws in double and casts so that float and double
/// instances built from the same seed agree to float precision.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  template <typename Scalar>
  void uniform(Param<Scalar>& p, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng_));
  }

  template <typename Scalar>
  void normal(Param<Scalar>& p, double stddev) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(stddev * dist(rng_));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace afa::nn
