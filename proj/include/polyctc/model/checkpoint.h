// polyctc/model/checkpoint.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Binary layout (all integers little-endian):
//   "CKPT"  u32 version  u32 entry_count
//   per entry: u32 name_len, name bytes, u32 ndim, u32 dims[ndim],
//              f64 values[prod(dims)]
// Entries named "meta.*" carry bookkeeping (validation loss, step, model
// shape); all others are parameters under their dotted path.

#ifndef POLYCTC_MODEL_CHECKPOINT_H_
#define POLYCTC_MODEL_CHECKPOINT_H_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "polyctc/autodiff/tensor.h"
#include "polyctc/model/params.h"

namespace polyctc {

struct CheckpointEntry {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;

  bool operator==(const CheckpointEntry &) const = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<CheckpointEntry> entries;
  double validation_loss = std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;

  const CheckpointEntry *Find(const std::string &name) const;
  // Throws FormatError when absent.
  const CheckpointEntry &Get(const std::string &name) const;
  void Put(const std::string &name, ad::Shape shape, std::vector<double> values);
  void PutMeta(const std::string &name, std::vector<double> values);
};

// Copies current parameter values.
Checkpoint Snapshot(const ParamList &params);
// Writes stored values into params by name. Throws FormatError on a missing
// name or shape mismatch, unless allow_missing is set.
void Restore(const Checkpoint &checkpoint, const ParamList &params,
             bool allow_missing = false);

void WriteCheckpoint(const Checkpoint &checkpoint, const std::string &path);
// Throws FormatError on a bad magic, unsupported version or truncation.
Checkpoint ReadCheckpoint(const std::string &path);

}  // namespace polyctc

#endif  // POLYCTC_MODEL_CHECKPOINT_H_
