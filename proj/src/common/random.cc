// polyctc/common/random.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/common/random.h"

namespace polyctc {

std::uint64_t StableHash(const std::string &text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::mt19937_64 DerivedRng(std::uint64_t seed, const std::string &purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(StableHash(purpose)),
                    static_cast<std::uint32_t>(StableHash(purpose) >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace polyctc
