// polyctc/common/random.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_COMMON_RANDOM_H_
#define POLYCTC_COMMON_RANDOM_H_

#include <cstdint>
#include <random>
#include <string>

namespace polyctc {

// 64-bit FNV-1a; stable across platforms.
std::uint64_t StableHash(const std::string &text);

// Independent deterministic stream for a named purpose, so adding an
// optional component never shifts the draws of another.
std::mt19937_64 DerivedRng(std::uint64_t seed, const std::string &purpose);

}  // namespace polyctc

#endif  // POLYCTC_COMMON_RANDOM_H_
