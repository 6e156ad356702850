// polyctc/model/layers.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Transformer building blocks shared by the upstream and downstream encoders.
// Activations are [frames x features].

#ifndef POLYCTC_MODEL_LAYERS_H_
#define POLYCTC_MODEL_LAYERS_H_

#include <cstddef>
#include <optional>
#include <random>
#include <string>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/model/params.h"

namespace polyctc {

// Trainable rank-r update of a frozen projection:
//   y = base(x) + (alpha / r) * x A^T B^T
// A starts uniform in +-1/sqrt(d_in), B starts at zero, so the adapted
// projection is exactly the base projection until B moves.
struct LowRankAdapter {
  ad::Tensor a;  // [r x d_in]
  ad::Tensor b;  // [d_out x r]
  std::size_t rank = 0;
  double alpha = 0.0;

  LowRankAdapter(std::size_t d_in, std::size_t d_out, std::size_t rank,
                 double alpha, std::mt19937_64 &rng);
  double scale() const { return alpha / static_cast<double>(rank); }
  ad::Tensor Delta(const ad::Tensor &x) const;
};

// y = x W^T + b with W [out x in].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64 &rng);

  ad::Tensor Forward(const ad::Tensor &x) const;

  void AttachAdapter(std::size_t rank, double alpha, std::mt19937_64 &rng);
  void DetachAdapter() { adapter_.reset(); }
  const std::optional<LowRankAdapter> &adapter() const { return adapter_; }

  // Base weight and bias, without adapter factors.
  void CollectBase(const std::string &prefix, ParamList &out) const;
  void CollectAdapter(const std::string &prefix, ParamList &out) const;
  void Collect(const std::string &prefix, ParamList &out) const;

  std::size_t in_features() const { return weight_.cols(); }
  std::size_t out_features() const { return weight_.rows(); }
  const ad::Tensor &weight() const { return weight_; }
  const ad::Tensor &bias() const { return bias_; }

 private:
  ad::Tensor weight_;
  ad::Tensor bias_;
  std::optional<LowRankAdapter> adapter_;
};

struct LayerNormParams {
  ad::Tensor gain;
  ad::Tensor bias;

  LayerNormParams() = default;
  explicit LayerNormParams(std::size_t dim);
  ad::Tensor Forward(const ad::Tensor &x) const;
  void Collect(const std::string &prefix, ParamList &out) const;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t dim, std::size_t heads, std::mt19937_64 &rng);

  ad::Tensor Forward(const ad::Tensor &x) const;

  // Query, key, value and output projections.
  Linear &q() { return q_; }
  Linear &k() { return k_; }
  Linear &v() { return v_; }
  Linear &o() { return o_; }
  void Collect(const std::string &prefix, ParamList &out) const;

 private:
  std::size_t heads_ = 1;
  Linear q_, k_, v_, o_;
};

// Post-norm Transformer encoder layer:
//   h = LN(x + MHA(x)),  y = LN(h + W2 relu(W1 h)).
class EncoderLayer {
 public:
  EncoderLayer() = default;
  EncoderLayer(std::size_t dim, std::size_t heads, std::size_t ff_dim,
               std::mt19937_64 &rng);

  ad::Tensor Forward(const ad::Tensor &x) const;

  MultiHeadAttention &attention() { return attn_; }
  const MultiHeadAttention &attention() const { return attn_; }
  void Collect(const std::string &prefix, ParamList &out) const;

 private:
  MultiHeadAttention attn_;
  LayerNormParams norm1_;
  Linear ff1_, ff2_;
  LayerNormParams norm2_;
};

// Sinusoidal position table [frames x dim]: sin on even, cos on odd columns.
ad::Tensor SinusoidalPositions(std::size_t frames, std::size_t dim);

}  // namespace polyctc

#endif  // POLYCTC_MODEL_LAYERS_H_
