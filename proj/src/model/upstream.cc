// polyctc/model/upstream.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/upstream.h"

#include <string>

#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"

namespace polyctc {

UpstreamModel::UpstreamModel(const UpstreamConfig &config, std::mt19937_64 &rng)
    : config_(config) {
  if (config.num_layers < 2) {
    throw ConfigError("upstream: at least 2 layers required, got " +
                      std::to_string(config.num_layers));
  }
  layers_.reserve(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    layers_.emplace_back(config.input_dim, config.num_heads, config.ff_dim, rng);
  }
}

std::vector<ad::Tensor> UpstreamModel::Forward(const ad::Tensor &features) const {
  return ForwardFrom(features, 0);
}

std::vector<ad::Tensor> UpstreamModel::ForwardFrom(const ad::Tensor &input,
                                                   std::size_t start) const {
  if (input.ndim() != 2 || input.cols() != config_.input_dim) {
    throw DimensionError("upstream: expected [T x " +
                         std::to_string(config_.input_dim) + "] input, got " +
                         ad::ShapeString(input.shape()));
  }
  if (start > layers_.size()) {
    throw ContractError("upstream: start layer " + std::to_string(start) +
                        " beyond depth " + std::to_string(layers_.size()));
  }
  std::vector<ad::Tensor> outputs;
  outputs.reserve(layers_.size() - start);
  ad::Tensor z = input;
  for (std::size_t l = start; l < layers_.size(); ++l) {
    z = layers_[l].Forward(z);
    if (!z.AllFinite()) {
      throw NumericError("upstream: non-finite activation in layer " +
                         std::to_string(l + 1));
    }
    outputs.push_back(z);
  }
  return outputs;
}

ParamList UpstreamModel::LayerParams(std::size_t l) const {
  ParamList out;
  layer(l).Collect("upstream.layer" + std::to_string(l), out);
  return out;
}

ParamList UpstreamModel::Params() const {
  ParamList out;
  for (std::size_t l = 1; l <= layers_.size(); ++l) {
    layer(l).Collect("upstream.layer" + std::to_string(l), out);
  }
  return out;
}

Featurizer::Featurizer(std::size_t num_layers)
    : raw_(ad::Tensor::Zeros({num_layers})) {}

ad::Tensor Featurizer::Weights() const { return ad::Softmax(raw_); }

ad::Tensor Featurizer::Forward(std::span<const ad::Tensor> layer_outputs) const {
  if (layer_outputs.empty()) throw ContractError("featurizer: no layer outputs");
  if (layer_outputs.size() != raw_.size()) {
    throw ContractError("featurizer: " + std::to_string(raw_.size()) +
                        " weights for " + std::to_string(layer_outputs.size()) +
                        " layer outputs");
  }
  return ad::WeightedSum(Weights(), layer_outputs);
}

void Featurizer::Collect(const std::string &prefix, ParamList &out) const {
  out.push_back({prefix + ".raw_weights", raw_});
}

}  // namespace polyctc
