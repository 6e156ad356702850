// polyctc/model/downstream.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_MODEL_DOWNSTREAM_H_
#define POLYCTC_MODEL_DOWNSTREAM_H_

#include <cstddef>
#include <random>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/model/layers.h"
#include "polyctc/model/params.h"

namespace polyctc {

struct DownstreamConfig {
  std::size_t proj_dim = 32;
  // Time subsampling of the input layer; 1 selects a linear input layer,
  // anything larger a kernel-3 convolution with that stride and padding 1.
  std::size_t subsampling = 2;
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ff_dim = 256;
  std::size_t vocab_size = 0;
};

// projection -> input layer -> + positions -> encoder stack -> head ->
// log-softmax over the vocabulary.
class DownstreamModel {
 public:
  static constexpr std::size_t kKernel = 3;

  DownstreamModel() = default;
  DownstreamModel(std::size_t input_dim, const DownstreamConfig &config,
                  std::mt19937_64 &rng);

  // [T x D] -> [T' x |V|] log-probabilities.
  ad::Tensor Forward(const ad::Tensor &features) const;

  // floor((T - 1)/kappa) + 1 for the convolutional input layer, T for linear.
  std::size_t OutputFrames(std::size_t frames) const;

  const DownstreamConfig &config() const { return config_; }
  ParamList Params() const;

 private:
  DownstreamConfig config_;
  Linear proj_;
  Linear input_;
  std::vector<EncoderLayer> layers_;
  Linear head_;
};

}  // namespace polyctc

#endif  // POLYCTC_MODEL_DOWNSTREAM_H_
