// polyctc/autodiff/ops.h
//
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable primitives. Matrices are [rows x cols]; vectors are 1-D.
// Every primitive throws DimensionError on non-conforming shapes.

#ifndef POLYCTC_AUTODIFF_OPS_H_
#define POLYCTC_AUTODIFF_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "polyctc/autodiff/tensor.h"

namespace polyctc::ad {

// [m x k] . [k x n]
Tensor MatMul(const Tensor &a, const Tensor &b);
// [m x k] . [n x k]^T, the layout used by linear layers and attention scores.
Tensor MatMulNT(const Tensor &a, const Tensor &b);
Tensor Transpose(const Tensor &a);

Tensor Add(const Tensor &a, const Tensor &b);
Tensor Sub(const Tensor &a, const Tensor &b);
Tensor Mul(const Tensor &a, const Tensor &b);
Tensor Scale(const Tensor &a, double factor);
Tensor Neg(const Tensor &a);
// Adds a length-n vector to every row of an [m x n] matrix.
Tensor AddRowVector(const Tensor &a, const Tensor &row);

Tensor Relu(const Tensor &a);

// Along the last axis (per row for matrices).
Tensor Softmax(const Tensor &a);
Tensor LogSoftmax(const Tensor &a);

// Per-row normalization with learned gain and bias (both length cols).
Tensor LayerNorm(const Tensor &x, const Tensor &gain, const Tensor &bias,
                 double eps = 1e-5);

// Frame stacking for a 1-D convolution over time: [T x C] ->
// [T' x kernel*C] with T' = floor((T + 2*padding - kernel)/stride) + 1.
// Out-of-range frames are zero.
Tensor Unfold(const Tensor &x, std::size_t kernel, std::size_t stride,
              std::size_t padding);
// Strided 1-D convolution. weight is [C_out x kernel*C_in] laid out as
// Unfold produces it; bias is [C_out].
Tensor Conv1d(const Tensor &x, const Tensor &weight, const Tensor &bias,
              std::size_t stride, std::size_t padding);

Tensor SliceRows(const Tensor &a, std::size_t begin, std::size_t end);
Tensor SliceCols(const Tensor &a, std::size_t begin, std::size_t end);
Tensor ConcatRows(std::span<const Tensor> parts);
Tensor ConcatCols(std::span<const Tensor> parts);

Tensor Sum(const Tensor &a);
Tensor Mean(const Tensor &a);
// Element of a tensor by flat index, as a scalar.
Tensor Pick(const Tensor &a, std::size_t index);

// sum_l weights[l] * parts[l]; weights is a length-L vector.
Tensor WeightedSum(const Tensor &weights, std::span<const Tensor> parts);

// log(sum exp(a)) over all elements, max-subtracted. -inf when every element
// is -inf; such inputs receive zero gradient.
Tensor LogSumExp(const Tensor &a);
// Elementwise log-sum-exp across same-shape tensors.
Tensor LogSumExp(std::span<const Tensor> parts);

// y[i] = x[row, indices[i]] for a matrix x.
Tensor GatherRow(const Tensor &x, std::size_t row,
                 std::span<const int> indices);
// y[i] = (i >= shift && keep[i]) ? x[i - shift] : fill, for a vector x.
// keep may be empty, meaning every position is kept.
Tensor ShiftRight(const Tensor &x, std::size_t shift, double fill,
                  std::span<const char> keep = {});

}  // namespace polyctc::ad

#endif  // POLYCTC_AUTODIFF_OPS_H_
