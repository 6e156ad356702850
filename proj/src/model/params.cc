// polyctc/model/params.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/params.h"

namespace polyctc {

void SetRequiresGrad(const ParamList &params, bool value) {
  for (const auto &p : params) {
    ad::Tensor t = p.tensor;
    t.set_requires_grad(value);
  }
}

std::vector<std::string> ParamNames(const ParamList &params) {
  std::vector<std::string> names;
  names.reserve(params.size());
  for (const auto &p : params) names.push_back(p.name);
  return names;
}

std::size_t CountValues(const ParamList &params) {
  std::size_t n = 0;
  for (const auto &p : params) n += p.tensor.size();
  return n;
}

ad::Tensor UniformTensor(ad::Shape shape, double bound, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(ad::NumElements(shape));
  for (double &x : v) x = dist(rng);
  return ad::Tensor(std::move(shape), std::move(v));
}

}  // namespace polyctc
