#pragma once

// Reference computations written independently of the library code paths:
// plain loops, no confusion matrix, no Eigen block tricks.

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "afa/core.hpp"
#include "afa/synthgen.hpp"

namespace afa::oracle {

inline double bacc(const std::vector<int>& preds, const std::vector<int>& labels) {
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < 3; ++c) {
    int support = 0, hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      ++support;
      if (preds[i] == c) ++hit;
    }
    if (support == 0) continue;
    sum += static_cast<double>(hit) / support;
    ++classes;
  }
  return sum / classes;
}

inline double weighted_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (preds[i] == c && labels[i] == c) ++tp;
      if (preds[i] == c && labels[i] != c) ++fp;
      if (preds[i] != c && labels[i] == c) ++fn;
    }
    const int support = tp + fn;
    if (support == 0) continue;
    const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
    total += f1 * support;
  }
  return total / static_cast<double>(labels.size());
}

inline double bmae(const std::vector<int>& preds, const std::vector<int>& labels) {
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < 3; ++c) {
    double err = 0.0;
    int support = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      ++support;
      err += std::abs(preds[i] - labels[i]);
    }
    if (support == 0) continue;
    sum += err / support;
    ++classes;
  }
  return sum / classes;
}

/// Naive single-head attention with explicit loops; `q`, `k`, `v` are
/// row-major T x d arrays.
inline std::vector<double> attention(const std::vector<std::vector<double>>& q, const std::vector<std::vector<double>>& k,
                                     const std::vector<std::vector<double>>& v, const std::vector<bool>& key_mask,
                                     std::size_t row) {
  const std::size_t t = k.size(), d = q[0].size();
  std::vector<double> scores(t, 0.0);
  double mx = -1e300;
  for (std::size_t j = 0; j < t; ++j) {
    if (!key_mask[j]) continue;
    double s = 0.0;
    for (std::size_t x = 0; x < d; ++x) s += q[row][x] * k[j][x];
    scores[j] = s / std::sqrt(static_cast<double>(d));
    mx = std::max(mx, scores[j]);
  }
  double z = 0.0;
  for (std::size_t j = 0; j < t; ++j)
    if (key_mask[j]) z += std::exp(scores[j] - mx);
  std::vector<double> out(v[0].size(), 0.0);
  for (std::size_t j = 0; j < t; ++j) {
    if (!key_mask[j]) continue;
    const double w = std::exp(scores[j] - mx) / z;
    for (std::size_t x = 0; x < out.size(); ++x) out[x] += w * v[j][x];
  }
  return out;
}

}  // namespace afa::oracle

// Posterior over labels under the generative model, written from scratch:
// full per-dimension Gaussian likelihood, composite Simpson over each clip's
// quality, explicit enumeration of (a, b) and of which clip is primary.
namespace afa::oracle {

inline double log_sum_exp(const std::vector<double>& xs) {
  double m = -1e300;
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::array<double, 3> bayes_posterior(const AcquisitionState& st, const synthgen::GeneratorSpec& spec) {
  const int d = spec.d, h = d / 2, grid = 4000;  // even number of Simpson panels
  auto slot_loglik = [&](int slot, double q, int a, int b) {
    const bool plax = slot < 2;
    double ll = 0.0;
    for (int j = 0; j < d; ++j) {
      double mean = 0.0;
      if (plax && j < h) mean = q * (2 * a - 1);
      if (!plax && j >= h) mean = q * (2 * b - 1);
      const double r = st.features(slot, j) - mean;
      ll -= r * r / (2 * spec.noise_sigma * spec.noise_sigma);
    }
    return ll;
  };
  // log of integral over q ~ U[lo, hi] of exp(loglik)
  auto log_marginal = [&](int slot, std::array<double, 2> range, int a, int b) {
    const double lo = range[0], hi = range[1], step = (hi - lo) / grid;
    std::vector<double> terms;
    for (int k = 0; k <= grid; ++k) {
      const double w = (k == 0 || k == grid) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      terms.push_back(std::log(w * step / 3.0 / (hi - lo)) + slot_loglik(slot, lo + k * step, a, b));
    }
    return log_sum_exp(terms);
  };
  std::array<double, 4> joint{};  // index 2a + b
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double total = 0.0;
      for (int view = 0; view < 2; ++view) {
        const int s0 = 2 * view;
        std::vector<double> branches;
        for (int primary = 0; primary < 2; ++primary) {
          double br = std::log(0.5);
          for (int k = 0; k < 2; ++k) {
            if (!st.mask[s0 + k]) continue;
            br += log_marginal(s0 + k, k == primary ? spec.quality_range : spec.degraded_range, a, b);
          }
          branches.push_back(br);
        }
        total += log_sum_exp(branches);
      }
      joint[2 * a + b] = total;
    }
  const double z = log_sum_exp({joint[0], joint[1], joint[2], joint[3]});
  return {std::exp(joint[0] - z), std::exp(joint[1] - z) + std::exp(joint[2] - z), std::exp(joint[3] - z)};
}

}  // namespace afa::oracle
