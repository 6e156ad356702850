// polyctc/autodiff/tensor.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_AUTODIFF_TENSOR_H_
#define POLYCTC_AUTODIFF_TENSOR_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace polyctc::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape &shape);
std::string ShapeString(const Shape &shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Empty until the first gradient is accumulated; same size as data after.
  std::vector<double> grad;
  bool requires_grad = false;

  std::vector<double> &GradBuffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

// Dense row-major float64 tensor with a gradient slot. Copies share storage
// (handle semantics); use Clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Filled(Shape shape, double value);
  static Tensor Scalar(double value, bool requires_grad = false);
  static Tensor Vector(std::vector<double> values, bool requires_grad = false);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape &shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  // Leading extent; 1 for scalars.
  std::size_t rows() const;
  // Trailing extent for matrices, the length for vectors, 1 for scalars.
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const {
    return impl_->data[r * cols() + c];
  }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Zero-filled view when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  Tensor Clone() const;
  // Same values, no gradient tracking, fresh storage.
  Tensor Detached() const;
  bool AllFinite() const;

  const std::shared_ptr<TensorImpl> &impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

}  // namespace polyctc::ad

#endif  // POLYCTC_AUTODIFF_TENSOR_H_
