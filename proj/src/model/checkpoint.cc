// polyctc/model/checkpoint.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/model/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "polyctc/common/errors.h"

namespace polyctc {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};
constexpr const char *kValidationLoss = "meta.validation_loss";
constexpr const char *kStep = "meta.step";

template <typename T>
void Put(std::string &buf, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string &data, const std::string &path) : data_(data), path_(path) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void Need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw FormatError(path_ + ": truncated checkpoint");
  }
  const std::string &data_;
  const std::string &path_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry *Checkpoint::Find(const std::string &name) const {
  for (const auto &e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const CheckpointEntry &Checkpoint::Get(const std::string &name) const {
  const CheckpointEntry *e = Find(name);
  if (!e) throw FormatError("checkpoint has no entry '" + name + "'");
  return *e;
}

void Checkpoint::Put(const std::string &name, ad::Shape shape,
                     std::vector<double> values) {
  if (ad::NumElements(shape) != values.size()) {
    throw DimensionError("checkpoint entry '" + name + "': shape " +
                         ad::ShapeString(shape) + " for " +
                         std::to_string(values.size()) + " values");
  }
  for (auto &e : entries) {
    if (e.name == name) {
      e.shape = std::move(shape);
      e.values = std::move(values);
      return;
    }
  }
  entries.push_back({name, std::move(shape), std::move(values)});
}

void Checkpoint::PutMeta(const std::string &name, std::vector<double> values) {
  const std::size_t n = values.size();
  Put("meta." + name, {n}, std::move(values));
}

Checkpoint Snapshot(const ParamList &params) {
  Checkpoint ck;
  ck.entries.reserve(params.size());
  for (const auto &p : params) {
    ck.entries.push_back({p.name, p.tensor.shape(),
                          {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  return ck;
}

void Restore(const Checkpoint &checkpoint, const ParamList &params,
             bool allow_missing) {
  for (const auto &p : params) {
    const CheckpointEntry *e = checkpoint.Find(p.name);
    if (!e) {
      if (allow_missing) continue;
      throw FormatError("checkpoint has no entry '" + p.name + "'");
    }
    if (e->shape != p.tensor.shape()) {
      throw FormatError("checkpoint entry '" + p.name + "' has shape " +
                        ad::ShapeString(e->shape) + ", model expects " +
                        ad::ShapeString(p.tensor.shape()));
    }
    ad::Tensor t = p.tensor;
    std::copy(e->values.begin(), e->values.end(), t.mutable_data().begin());
  }
}

void WriteCheckpoint(const Checkpoint &checkpoint, const std::string &path) {
  std::vector<const CheckpointEntry *> order;
  for (const auto &e : checkpoint.entries) {
    if (e.name != kValidationLoss && e.name != kStep) order.push_back(&e);
  }
  const CheckpointEntry loss{kValidationLoss, {1}, {checkpoint.validation_loss}};
  const CheckpointEntry step{kStep, {1}, {static_cast<double>(checkpoint.step)}};
  order.push_back(&loss);
  order.push_back(&step);

  std::string buf(kMagic, 4);
  Put<std::uint32_t>(buf, Checkpoint::kVersion);
  Put<std::uint32_t>(buf, static_cast<std::uint32_t>(order.size()));
  for (const CheckpointEntry *e : order) {
    Put<std::uint32_t>(buf, static_cast<std::uint32_t>(e->name.size()));
    buf += e->name;
    Put<std::uint32_t>(buf, static_cast<std::uint32_t>(e->shape.size()));
    for (std::size_t d : e->shape) Put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
    for (double v : e->values) Put<double>(buf, v);
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("short write to " + path);
}

Checkpoint ReadCheckpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  const std::string data{std::istreambuf_iterator<char>(is), {}};
  Reader r(data, path);
  if (r.Bytes(4) != std::string(kMagic, 4)) {
    throw FormatError(path + ": bad magic (expected CKPT)");
  }
  const auto version = r.Get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const auto count = r.Get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.Bytes(r.Get<std::uint32_t>());
    const auto ndim = r.Get<std::uint32_t>();
    for (std::uint32_t d = 0; d < ndim; ++d) e.shape.push_back(r.Get<std::uint32_t>());
    e.values.resize(ad::NumElements(e.shape));
    for (double &v : e.values) v = r.Get<double>();
    if (e.name == kValidationLoss) {
      ck.validation_loss = e.values.at(0);
    } else if (e.name == kStep) {
      ck.step = static_cast<std::uint64_t>(e.values.at(0));
    } else {
      ck.entries.push_back(std::move(e));
    }
  }
  if (!r.done()) throw FormatError(path + ": trailing bytes after last entry");
  return ck;
}

}  // namespace polyctc
