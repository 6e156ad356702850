// polyctc/model/params.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_MODEL_PARAMS_H_
#define POLYCTC_MODEL_PARAMS_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/common/random.h"

namespace polyctc {

// A parameter and its stable dotted path, e.g. "upstream.layer3.attn.q.weight".
struct NamedParam {
  std::string name;
  ad::Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

void SetRequiresGrad(const ParamList &params, bool value);
std::vector<std::string> ParamNames(const ParamList &params);
std::size_t CountValues(const ParamList &params);

ad::Tensor UniformTensor(ad::Shape shape, double bound, std::mt19937_64 &rng);

}  // namespace polyctc

#endif  // POLYCTC_MODEL_PARAMS_H_
