#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "afa/neural/layers.hpp"

namespace afa::nn {

/// Pre-softmax score assigned to masked keys before their weights are reset
/// to exactly zero.
inline constexpr double kMaskedScore = -1e9;

template <typename Scalar>
struct AttentionResult {
  Mat<Scalar> output;                 // T x d, heads concatenated
  std::vector<Mat<Scalar>> weights;  // one T x T matrix per head
};

namespace detail {

// Softmax over the unmasked columns of `scores`; masked columns end up
// exactly zero.
template <typename Scalar>
void masked_softmax_inplace(Eigen::Ref<Mat<Scalar>> scores, const std::vector<bool>& key_mask, std::size_t offset) {
  const Eigen::Index t = scores.cols();
  for (Eigen::Index j = 0; j < t; ++j)
    if (!key_mask[offset + j]) scores.col(j).setConstant(Scalar(kMaskedScore));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const Scalar m = scores.row(r).maxCoeff();
    scores.row(r) = (scores.row(r).array() - m).exp();
    scores.row(r) /= scores.row(r).sum();
  }
  for (Eigen::Index j = 0; j < t; ++j)
    if (!key_mask[offset + j]) scores.col(j).setZero();
}

template <typename Scalar>
void require_unmasked_key(const std::vector<bool>& key_mask, std::size_t offset, Eigen::Index t) {
  for (Eigen::Index j = 0; j < t; ++j)
    if (key_mask[offset + j]) return;
  throw Error("attention", "every key of a sequence is masked; at least one key must be attendable");
}

}  // namespace detail

/// Scaled dot-product attention over already-projected q, k, v (T x d each),
/// split into `heads` contiguous column blocks.
template <typename Scalar>
AttentionResult<Scalar> multi_head_attention(const Mat<Scalar>& q, const Mat<Scalar>& k, const Mat<Scalar>& v,
                                             const std::vector<bool>& key_mask, int heads) {
  const Eigen::Index t = k.rows(), d = q.cols();
  if (heads <= 0 || d % heads != 0) throw Error("shape", "model dim must be divisible by the number of heads");
  if (k.cols() != d || v.cols() != d || v.rows() != t || static_cast<Eigen::Index>(key_mask.size()) != t)
    throw Error("shape", "attention: q/k/v/mask shapes disagree");
  detail::require_unmasked_key<Scalar>(key_mask, 0, t);
  const Eigen::Index dh = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  AttentionResult<Scalar> res;
  res.output.resize(q.rows(), d);
  for (int h = 0; h < heads; ++h) {
    Mat<Scalar> s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() * scale;
    detail::masked_softmax_inplace<Scalar>(s, key_mask, 0);
    res.output.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
    res.weights.push_back(std::move(s));
  }
  return res;
}

/// Multi-head self-attention with learned projections over a batch of
/// equal-length sequences stacked row-wise ((B*T) x d). `key_mask` has one
/// entry per stacked row. The key projection has no bias: a per-query
/// constant shift cannot change a softmax row.
template <typename Scalar>
class MultiHeadAttention {
 public:
  struct Cache {
    typename Dense<Scalar>::Cache q_in, k_in, v_in, o_in;
    Mat<Scalar> q, k, v;
    std::vector<Mat<Scalar>> weights;  // index b * heads + h
    int seq_len = 1;
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(const std::string& name, int dim, int heads)
      : wq(name + ".q", dim, dim), wk(name + ".k", dim, dim, /*bias=*/false), wv(name + ".v", dim, dim),
        wo(name + ".out", dim, dim), heads_(heads) {
    if (heads <= 0 || dim % heads != 0) throw Error("shape", "model dim must be divisible by the number of heads");
  }

  void init(Initializer& init) {
    wq.init(init);
    wk.init(init);
    wv.init(init);
    wo.init(init);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, const std::vector<bool>& key_mask, int seq_len,
                      Cache* cache = nullptr) const {
    const Eigen::Index rows = x.rows(), d = x.cols();
    if (seq_len <= 0 || rows % seq_len != 0 || static_cast<Eigen::Index>(key_mask.size()) != rows)
      throw Error("shape", "attention: batch rows must be a multiple of the sequence length");
    const Eigen::Index batch = rows / seq_len, dh = d / heads_;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    Mat<Scalar> q = wq.forward(x, cache ? &cache->q_in : nullptr);
    Mat<Scalar> k = wk.forward(x, cache ? &cache->k_in : nullptr);
    Mat<Scalar> v = wv.forward(x, cache ? &cache->v_in : nullptr);
    std::vector<Mat<Scalar>> weights(static_cast<std::size_t>(batch * heads_));
    Mat<Scalar> ctx(rows, d);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const std::size_t off = static_cast<std::size_t>(b * seq_len);
      detail::require_unmasked_key<Scalar>(key_mask, off, seq_len);
      for (int h = 0; h < heads_; ++h) {
        auto& a = weights[static_cast<std::size_t>(b * heads_ + h)];
        a.noalias() = q.block(b * seq_len, h * dh, seq_len, dh) * k.block(b * seq_len, h * dh, seq_len, dh).transpose();
        a *= scale;
        detail::masked_softmax_inplace<Scalar>(a, key_mask, off);
        ctx.block(b * seq_len, h * dh, seq_len, dh).noalias() = a * v.block(b * seq_len, h * dh, seq_len, dh);
      }
    }
    Mat<Scalar> y = wo.forward(ctx, cache ? &cache->o_in : nullptr);
    if (cache) {
      cache->q = std::move(q);
      cache->k = std::move(k);
      cache->v = std::move(v);
      cache->weights = std::move(weights);
      cache->seq_len = seq_len;
    }
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& c) {
    const Eigen::Index rows = dy.rows(), d = dy.cols();
    const int t = c.seq_len;
    const Eigen::Index batch = rows / t, dh = d / heads_;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    const Mat<Scalar> dctx = wo.backward(dy, c.o_in);
    Mat<Scalar> dq(rows, d), dk(rows, d), dv(rows, d);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int h = 0; h < heads_; ++h) {
        const auto& a = c.weights[static_cast<std::size_t>(b * heads_ + h)];
        const auto dc = dctx.block(b * t, h * dh, t, dh);
        Mat<Scalar> da = dc * c.v.block(b * t, h * dh, t, dh).transpose();
        dv.block(b * t, h * dh, t, dh).noalias() = a.transpose() * dc;
        // Softmax Jacobian; masked entries have a == 0 so they stay zero.
        const Vec<Scalar> row_dot = (da.array() * a.array()).rowwise().sum();
        Mat<Scalar> ds = a.array() * (da.colwise() - row_dot).array();
        ds *= scale;
        dq.block(b * t, h * dh, t, dh).noalias() = ds * c.k.block(b * t, h * dh, t, dh);
        dk.block(b * t, h * dh, t, dh).noalias() = ds.transpose() * c.q.block(b * t, h * dh, t, dh);
      }
    }
    Mat<Scalar> dx = wq.backward(dq, c.q_in);
    dx += wk.backward(dk, c.k_in);
    dx += wv.backward(dv, c.v_in);
    return dx;
  }

  int heads() const { return heads_; }

  void collect(ParamRefs<Scalar>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }

  Dense<Scalar> wq, wk, wv, wo;

 private:
  int heads_ = 1;
};

/// Pre-norm transformer encoder block:
///   h = x + MHA(LN1(x)),  y = h + W2 relu(W1 LN2(h)).
template <typename Scalar>
class EncoderBlock {
 public:
  struct Cache {
    typename LayerNorm<Scalar>::Cache ln1, ln2;
    typename MultiHeadAttention<Scalar>::Cache attn;
    typename Dense<Scalar>::Cache ff1, ff2;
    Mat<Scalar> pre;
  };

  EncoderBlock() = default;
  EncoderBlock(const std::string& name, int dim, int heads, int ff_dim)
      : ln1(name + ".ln1", dim), attn(name + ".attn", dim, heads), ln2(name + ".ln2", dim),
        ff1(name + ".ff1", dim, ff_dim), ff2(name + ".ff2", ff_dim, dim) {}

  void init(Initializer& init) {
    attn.init(init);
    ff1.init(init);
    ff2.init(init);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, const std::vector<bool>& key_mask, int seq_len,
                      Cache* c = nullptr) const {
    Mat<Scalar> h = x + attn.forward(ln1.forward(x, c ? &c->ln1 : nullptr), key_mask, seq_len, c ? &c->attn : nullptr);
    Mat<Scalar> pre = ff1.forward(ln2.forward(h, c ? &c->ln2 : nullptr), c ? &c->ff1 : nullptr);
    h += ff2.forward(relu(pre), c ? &c->ff2 : nullptr);
    if (c) c->pre = std::move(pre);
    return h;
  }

  Mat<Scalar> backward(const Mat<Scalar>& dy, const Cache& c) {
    Mat<Scalar> dh = dy + ln2.backward(ff1.backward(relu_backward(c.pre, ff2.backward(dy, c.ff2)), c.ff1), c.ln2);
    return dh + ln1.backward(attn.backward(dh, c.attn), c.ln1);
  }

  void collect(ParamRefs<Scalar>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    ff1.collect(out);
    ff2.collect(out);
  }

  LayerNorm<Scalar> ln1;
  MultiHeadAttention<Scalar> attn;
  LayerNorm<Scalar> ln2;
  Dense<Scalar> ff1, ff2;
};

}  // namespace afa::nn
