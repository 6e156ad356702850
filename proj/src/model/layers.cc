// polyctc/model/layers.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/layers.h"

#include <cmath>
#include <vector>

#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"

namespace polyctc {

LowRankAdapter::LowRankAdapter(std::size_t d_in, std::size_t d_out,
                               std::size_t rank_, double alpha_,
                               std::mt19937_64 &rng)
    : rank(rank_), alpha(alpha_) {
  if (rank == 0) throw ContractError("low-rank adapter: rank must be positive");
  a = UniformTensor({rank, d_in}, 1.0 / std::sqrt(static_cast<double>(d_in)), rng);
  b = ad::Tensor::Zeros({d_out, rank});
}

ad::Tensor LowRankAdapter::Delta(const ad::Tensor &x) const {
  return ad::Scale(ad::MatMulNT(ad::MatMulNT(x, a), b), scale());
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64 &rng)
    : weight_(UniformTensor({out, in}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      bias_(ad::Tensor::Zeros({out})) {}

ad::Tensor Linear::Forward(const ad::Tensor &x) const {
  ad::Tensor y = ad::AddRowVector(ad::MatMulNT(x, weight_), bias_);
  if (adapter_) y = ad::Add(y, adapter_->Delta(x));
  return y;
}

void Linear::AttachAdapter(std::size_t rank, double alpha, std::mt19937_64 &rng) {
  adapter_.emplace(in_features(), out_features(), rank, alpha, rng);
}

void Linear::CollectBase(const std::string &prefix, ParamList &out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

void Linear::CollectAdapter(const std::string &prefix, ParamList &out) const {
  if (!adapter_) return;
  out.push_back({prefix + ".lora_a", adapter_->a});
  out.push_back({prefix + ".lora_b", adapter_->b});
}

void Linear::Collect(const std::string &prefix, ParamList &out) const {
  CollectBase(prefix, out);
  CollectAdapter(prefix, out);
}

LayerNormParams::LayerNormParams(std::size_t dim)
    : gain(ad::Tensor::Filled({dim}, 1.0)), bias(ad::Tensor::Zeros({dim})) {}

ad::Tensor LayerNormParams::Forward(const ad::Tensor &x) const {
  return ad::LayerNorm(x, gain, bias);
}

void LayerNormParams::Collect(const std::string &prefix, ParamList &out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

MultiHeadAttention::MultiHeadAttention(std::size_t dim, std::size_t heads,
                                       std::mt19937_64 &rng)
    : heads_(heads),
      q_(dim, dim, rng),
      k_(dim, dim, rng),
      v_(dim, dim, rng),
      o_(dim, dim, rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ContractError("attention: " + std::to_string(dim) +
                        " features do not split into " + std::to_string(heads) +
                        " heads");
  }
}

ad::Tensor MultiHeadAttention::Forward(const ad::Tensor &x) const {
  const ad::Tensor q = q_.Forward(x), k = k_.Forward(x), v = v_.Forward(x);
  const std::size_t dim = q.cols(), head_dim = dim / heads_;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<ad::Tensor> contexts;
  contexts.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    const ad::Tensor qh = heads_ == 1 ? q : ad::SliceCols(q, lo, hi);
    const ad::Tensor kh = heads_ == 1 ? k : ad::SliceCols(k, lo, hi);
    const ad::Tensor vh = heads_ == 1 ? v : ad::SliceCols(v, lo, hi);
    const ad::Tensor scores = ad::Softmax(ad::Scale(ad::MatMulNT(qh, kh), inv_sqrt));
    contexts.push_back(ad::MatMul(scores, vh));
  }
  const ad::Tensor context = heads_ == 1 ? contexts.front() : ad::ConcatCols(contexts);
  return o_.Forward(context);
}

void MultiHeadAttention::Collect(const std::string &prefix, ParamList &out) const {
  q_.Collect(prefix + ".q", out);
  k_.Collect(prefix + ".k", out);
  v_.Collect(prefix + ".v", out);
  o_.Collect(prefix + ".o", out);
}

EncoderLayer::EncoderLayer(std::size_t dim, std::size_t heads,
                           std::size_t ff_dim, std::mt19937_64 &rng)
    : attn_(dim, heads, rng),
      norm1_(dim),
      ff1_(dim, ff_dim, rng),
      ff2_(ff_dim, dim, rng),
      norm2_(dim) {}

ad::Tensor EncoderLayer::Forward(const ad::Tensor &x) const {
  const ad::Tensor h = norm1_.Forward(ad::Add(x, attn_.Forward(x)));
  const ad::Tensor f = ff2_.Forward(ad::Relu(ff1_.Forward(h)));
  return norm2_.Forward(ad::Add(h, f));
}

void EncoderLayer::Collect(const std::string &prefix, ParamList &out) const {
  attn_.Collect(prefix + ".attn", out);
  norm1_.Collect(prefix + ".norm1", out);
  ff1_.Collect(prefix + ".ff1", out);
  ff2_.Collect(prefix + ".ff2", out);
  norm2_.Collect(prefix + ".norm2", out);
}

ad::Tensor SinusoidalPositions(std::size_t frames, std::size_t dim) {
  std::vector<double> pe(frames * dim);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) /
                                                static_cast<double>(dim));
      const double angle = static_cast<double>(t) * rate;
      pe[t * dim + i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return ad::Tensor::Matrix(frames, dim, std::move(pe));
}

}  // namespace polyctc
