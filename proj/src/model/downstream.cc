// polyctc/model/downstream.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/downstream.h"

#include <string>

#include "polyctc/autodiff/ops.h"
#include "polyctc/common/errors.h"

namespace polyctc {

DownstreamModel::DownstreamModel(std::size_t input_dim,
                                 const DownstreamConfig &config,
                                 std::mt19937_64 &rng)
    : config_(config) {
  if (config.subsampling == 0) throw ConfigError("downstream: subsampling must be >= 1");
  if (config.vocab_size < 2) throw ConfigError("downstream: vocabulary needs blank plus one symbol");
  proj_ = Linear(input_dim, config.proj_dim, rng);
  const std::size_t in = config.subsampling > 1 ? kKernel * config.proj_dim
                                                : config.proj_dim;
  input_ = Linear(in, config.hidden_dim, rng);
  layers_.reserve(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    layers_.emplace_back(config.hidden_dim, config.num_heads, config.ff_dim, rng);
  }
  head_ = Linear(config.hidden_dim, config.vocab_size, rng);
}

std::size_t DownstreamModel::OutputFrames(std::size_t frames) const {
  if (frames == 0) return 0;
  return config_.subsampling > 1 ? (frames - 1) / config_.subsampling + 1 : frames;
}

ad::Tensor DownstreamModel::Forward(const ad::Tensor &features) const {
  if (features.ndim() != 2 || features.cols() != proj_.in_features()) {
    throw DimensionError("downstream: expected [T x " +
                         std::to_string(proj_.in_features()) + "] input, got " +
                         ad::ShapeString(features.shape()));
  }
  if (OutputFrames(features.rows()) < 1) {
    throw ContractError("downstream: input too short");
  }
  ad::Tensor h = proj_.Forward(features);
  if (config_.subsampling > 1) {
    h = ad::Conv1d(h, input_.weight(), input_.bias(), config_.subsampling, 1);
  } else {
    h = input_.Forward(h);
  }
  h = ad::Add(h, SinusoidalPositions(h.rows(), h.cols()));
  for (const EncoderLayer &layer : layers_) h = layer.Forward(h);
  return ad::LogSoftmax(head_.Forward(h));
}

ParamList DownstreamModel::Params() const {
  ParamList out;
  proj_.Collect("downstream.proj", out);
  input_.Collect("downstream.input", out);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].Collect("downstream.layer" + std::to_string(l + 1), out);
  }
  head_.Collect("downstream.head", out);
  return out;
}

}  // namespace polyctc
