// polyctc/model/upstream.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_MODEL_UPSTREAM_H_
#define POLYCTC_MODEL_UPSTREAM_H_

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/model/layers.h"
#include "polyctc/model/params.h"

namespace polyctc {

struct UpstreamConfig {
  std::size_t input_dim = 64;
  std::size_t num_layers = 6;
  std::size_t num_heads = 4;
  std::size_t ff_dim = 256;
};

// Stack of L shape-preserving encoder layers, Z^l = f^l(Z^{l-1}), Z^0 = X.
// Layers are addressed 1..L to match the layer-window notation.
class UpstreamModel {
 public:
  UpstreamModel() = default;
  UpstreamModel(const UpstreamConfig &config, std::mt19937_64 &rng);

  // Returns Z^1..Z^L (Z^0 excluded). Throws NumericError naming the first
  // layer whose output is not finite.
  std::vector<ad::Tensor> Forward(const ad::Tensor &features) const;
  // Continues from Z^{start} (start = 0 means the input features) and returns
  // Z^{start+1}..Z^L.
  std::vector<ad::Tensor> ForwardFrom(const ad::Tensor &input,
                                      std::size_t start) const;

  std::size_t num_layers() const { return layers_.size(); }
  const UpstreamConfig &config() const { return config_; }
  EncoderLayer &layer(std::size_t l) { return layers_.at(l - 1); }
  const EncoderLayer &layer(std::size_t l) const { return layers_.at(l - 1); }

  // Parameters of layer l, adapters included.
  ParamList LayerParams(std::size_t l) const;
  ParamList Params() const;

 private:
  UpstreamConfig config_;
  std::vector<EncoderLayer> layers_;
};

// Learnable convex combination of layer outputs: weights are softmax(raw),
// so they stay positive and sum to one under any update of raw.
class Featurizer {
 public:
  Featurizer() = default;
  explicit Featurizer(std::size_t num_layers);

  ad::Tensor Weights() const;
  // Throws ContractError on an empty list or a count mismatch.
  ad::Tensor Forward(std::span<const ad::Tensor> layer_outputs) const;

  ad::Tensor &raw_weights() { return raw_; }
  const ad::Tensor &raw_weights() const { return raw_; }
  void Collect(const std::string &prefix, ParamList &out) const;

 private:
  ad::Tensor raw_;
};

}  // namespace polyctc

#endif  // POLYCTC_MODEL_UPSTREAM_H_
