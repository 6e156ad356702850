// polyctc/autodiff/ops.cc
//
// SPDX-License-Identifier: Apache-2.0

#include "polyctc/autodiff/ops.h"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>

#include "polyctc/autodiff/tape.h"
#include "polyctc/common/errors.h"

namespace polyctc::ad {
namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool Tracks(std::initializer_list<const Tensor *> inputs) {
  if (Tape::Active() == nullptr) return false;
  for (const Tensor *t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool Tracks(std::span<const Tensor> inputs) {
  if (Tape::Active() == nullptr) return false;
  for (const Tensor &t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

Tensor MakeOutput(Shape shape, std::vector<double> values, bool track) {
  return Tensor(std::move(shape), std::move(values), track);
}

template <typename Fn>
void Record(const char *op, const Tensor &out, Fn &&fn) {
  Tape::Active()->Record(op, out.impl(), std::forward<Fn>(fn));
}

[[noreturn]] void ShapeFail(const char *op, const std::string &detail) {
  throw DimensionError(std::string(op) + ": " + detail);
}

void RequireMatrix(const char *op, const Tensor &t, const char *name) {
  if (!t.defined() || t.ndim() != 2) {
    ShapeFail(op, std::string(name) + " must be a matrix, got " +
                      (t.defined() ? ShapeString(t.shape()) : "<undefined>"));
  }
}

void RequireSameShape(const char *op, const Tensor &a, const Tensor &b) {
  if (a.shape() != b.shape()) {
    ShapeFail(op, "operand shapes differ: " + ShapeString(a.shape()) +
                      " vs " + ShapeString(b.shape()));
  }
}

// Only inputs that require a gradient receive one.
std::vector<double> *GradOf(const ImplPtr &p) {
  return p->requires_grad ? &p->GradBuffer() : nullptr;
}

// c[m x n] += a[m x k] . b[k x n]
void GemmNN(const double *a, const double *b, double *c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double *ci = c + i * n;
    const double *ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double *bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a[m x k] . b[n x k]^T
void GemmNT(const double *a, const double *b, double *c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *ai = a + i * k;
    double *ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double *bj = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// c[k x n] += a[m x k]^T . b[m x n]
void GemmTN(const double *a, const double *b, double *c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double *ai = a + i * k;
    const double *bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double *cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace

Tensor MatMul(const Tensor &a, const Tensor &b) {
  RequireMatrix("matmul", a, "lhs");
  RequireMatrix("matmul", b, "rhs");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    ShapeFail("matmul", "inner extents differ: " + ShapeString(a.shape()) +
                            " . " + ShapeString(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  GemmNN(a.data().data(), b.data().data(), out.data(), m, k, n);
  const bool track = Tracks({&a, &b});
  Tensor y = MakeOutput({m, n}, std::move(out), track);
  if (track) {
    Record("matmul", y, [ai = a.impl(), bi = b.impl(), yi = y.impl().get(), m,
                         k, n] {
      const double *dy = yi->grad.data();
      if (auto *ga = GradOf(ai)) GemmNT(dy, bi->data.data(), ga->data(), m, n, k);
      if (auto *gb = GradOf(bi)) GemmTN(ai->data.data(), dy, gb->data(), m, k, n);
    });
  }
  return y;
}

Tensor MatMulNT(const Tensor &a, const Tensor &b) {
  RequireMatrix("matmul_nt", a, "lhs");
  RequireMatrix("matmul_nt", b, "rhs");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    ShapeFail("matmul_nt", "inner extents differ: " + ShapeString(a.shape()) +
                               " . " + ShapeString(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  GemmNT(a.data().data(), b.data().data(), out.data(), m, k, n);
  const bool track = Tracks({&a, &b});
  Tensor y = MakeOutput({m, n}, std::move(out), track);
  if (track) {
    Record("matmul_nt", y, [ai = a.impl(), bi = b.impl(),
                            yi = y.impl().get(), m, k, n] {
      const double *dy = yi->grad.data();
      // dA = dY . B ; dB = dY^T . A
      if (auto *ga = GradOf(ai)) GemmNN(dy, bi->data.data(), ga->data(), m, n, k);
      if (auto *gb = GradOf(bi)) GemmTN(dy, ai->data.data(), gb->data(), m, n, k);
    });
  }
  return y;
}

Tensor Transpose(const Tensor &a) {
  RequireMatrix("transpose", a, "operand");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  }
  const bool track = Tracks({&a});
  Tensor y = MakeOutput({n, m}, std::move(out), track);
  if (track) {
    Record("transpose", y, [ai = a.impl(), yi = y.impl().get(), m, n] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += yi->grad[j * m + i];
      }
    });
  }
  return y;
}

Tensor Add(const Tensor &a, const Tensor &b) {
  RequireSameShape("add", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool track = Tracks({&a, &b});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("add", y, [ai = a.impl(), bi = b.impl(), yi = y.impl().get()] {
      const auto &dy = yi->grad;
      if (auto *ga = GradOf(ai)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
      }
      if (auto *gb = GradOf(bi)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i];
      }
    });
  }
  return y;
}

Tensor Sub(const Tensor &a, const Tensor &b) {
  RequireSameShape("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const bool track = Tracks({&a, &b});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("sub", y, [ai = a.impl(), bi = b.impl(), yi = y.impl().get()] {
      const auto &dy = yi->grad;
      if (auto *ga = GradOf(ai)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
      }
      if (auto *gb = GradOf(bi)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] -= dy[i];
      }
    });
  }
  return y;
}

Tensor Mul(const Tensor &a, const Tensor &b) {
  RequireSameShape("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool track = Tracks({&a, &b});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("mul", y, [ai = a.impl(), bi = b.impl(), yi = y.impl().get()] {
      const auto &dy = yi->grad;
      if (auto *ga = GradOf(ai)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * bi->data[i];
      }
      if (auto *gb = GradOf(bi)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i] * ai->data[i];
      }
    });
  }
  return y;
}

Tensor Scale(const Tensor &a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  const bool track = Tracks({&a});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("scale", y, [ai = a.impl(), yi = y.impl().get(), factor] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += yi->grad[i] * factor;
    });
  }
  return y;
}

Tensor Neg(const Tensor &a) { return Scale(a, -1.0); }

Tensor AddRowVector(const Tensor &a, const Tensor &row) {
  RequireMatrix("add_row_vector", a, "matrix");
  if (row.ndim() != 1 || row.size() != a.cols()) {
    ShapeFail("add_row_vector", "row " + ShapeString(row.shape()) +
                                    " does not match matrix " +
                                    ShapeString(a.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + row[j];
  }
  const bool track = Tracks({&a, &row});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("add_row_vector", y, [ai = a.impl(), ri = row.impl(),
                                 yi = y.impl().get(), m, n] {
      const auto &dy = yi->grad;
      if (auto *ga = GradOf(ai)) {
        for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i];
      }
      if (auto *gr = GradOf(ri)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) (*gr)[j] += dy[i * n + j];
        }
      }
    });
  }
  return y;
}

Tensor Relu(const Tensor &a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  const bool track = Tracks({&a});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("relu", y, [ai = a.impl(), yi = y.impl().get()] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        if (ai->data[i] > 0.0) ga[i] += yi->grad[i];
      }
    });
  }
  return y;
}

Tensor Softmax(const Tensor &a) {
  if (a.ndim() == 0 || a.ndim() > 2) {
    ShapeFail("softmax", "expects a vector or matrix, got " +
                             ShapeString(a.shape()));
  }
  const std::size_t m = a.ndim() == 2 ? a.rows() : 1, n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double *x = a.data().data() + i * n;
    double *o = out.data() + i * n;
    const double mx = *std::max_element(x, x + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (o[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= s;
  }
  const bool track = Tracks({&a});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("softmax", y, [ai = a.impl(), yi = y.impl().get(), m, n] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double *p = yi->data.data() + i * n;
        const double *dy = yi->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += dy[j] * p[j];
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += p[j] * (dy[j] - dot);
      }
    });
  }
  return y;
}

Tensor LogSoftmax(const Tensor &a) {
  if (a.ndim() == 0 || a.ndim() > 2) {
    ShapeFail("log_softmax", "expects a vector or matrix, got " +
                                 ShapeString(a.shape()));
  }
  const std::size_t m = a.ndim() == 2 ? a.rows() : 1, n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double *x = a.data().data() + i * n;
    double *o = out.data() + i * n;
    const double mx = *std::max_element(x, x + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(x[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < n; ++j) o[j] = x[j] - lse;
  }
  const bool track = Tracks({&a});
  Tensor y = MakeOutput(a.shape(), std::move(out), track);
  if (track) {
    Record("log_softmax", y, [ai = a.impl(), yi = y.impl().get(), m, n] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double *ly = yi->data.data() + i * n;
        const double *dy = yi->grad.data() + i * n;
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += dy[j];
        for (std::size_t j = 0; j < n; ++j) {
          ga[i * n + j] += dy[j] - std::exp(ly[j]) * total;
        }
      }
    });
  }
  return y;
}

Tensor LayerNorm(const Tensor &x, const Tensor &gain, const Tensor &bias,
                 double eps) {
  RequireMatrix("layer_norm", x, "input");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.size() != n || bias.size() != n) {
    ShapeFail("layer_norm", "gain " + ShapeString(gain.shape()) + " / bias " +
                                ShapeString(bias.shape()) +
                                " do not match width " + std::to_string(n));
  }
  std::vector<double> out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double *r = x.data().data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += r[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (r[j] - mean) * (r[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (r[j] - mean) * inv_std[i];
      xhat[i * n + j] = h;
      out[i * n + j] = h * gain[j] + bias[j];
    }
  }
  const bool track = Tracks({&x, &gain, &bias});
  Tensor y = MakeOutput(x.shape(), std::move(out), track);
  if (track) {
    Record("layer_norm", y, [xi = x.impl(), gi = gain.impl(), bi = bias.impl(),
                             yi = y.impl().get(), xhat = std::move(xhat),
                             inv_std = std::move(inv_std), m, n] {
      const auto &dy = yi->grad;
      auto *gg = GradOf(gi);
      auto *gb = GradOf(bi);
      auto *gx = GradOf(xi);
      std::vector<double> dh(n);
      for (std::size_t i = 0; i < m; ++i) {
        double mean_dh = 0.0, mean_dh_h = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = dy[i * n + j];
          if (gg) (*gg)[j] += d * xhat[i * n + j];
          if (gb) (*gb)[j] += d;
          dh[j] = d * gi->data[j];
          mean_dh += dh[j];
          mean_dh_h += dh[j] * xhat[i * n + j];
        }
        if (!gx) continue;
        mean_dh /= static_cast<double>(n);
        mean_dh_h /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          (*gx)[i * n + j] +=
              inv_std[i] * (dh[j] - mean_dh - xhat[i * n + j] * mean_dh_h);
        }
      }
    });
  }
  return y;
}

Tensor Unfold(const Tensor &x, std::size_t kernel, std::size_t stride,
              std::size_t padding) {
  RequireMatrix("unfold", x, "input");
  if (kernel == 0 || stride == 0) ShapeFail("unfold", "kernel and stride must be positive");
  const std::size_t t_in = x.rows(), c = x.cols();
  if (t_in + 2 * padding < kernel) {
    ShapeFail("unfold", "input of " + std::to_string(t_in) +
                            " frames is shorter than kernel " +
                            std::to_string(kernel));
  }
  const std::size_t t_out = (t_in + 2 * padding - kernel) / stride + 1;
  const std::size_t width = kernel * c;
  std::vector<double> out(t_out * width, 0.0);
  for (std::size_t t = 0; t < t_out; ++t) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                 static_cast<std::ptrdiff_t>(padding);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
      std::copy_n(x.data().data() + src * c, c, out.data() + t * width + k * c);
    }
  }
  const bool track = Tracks({&x});
  Tensor y = MakeOutput({t_out, width}, std::move(out), track);
  if (track) {
    Record("unfold", y, [xi = x.impl(), yi = y.impl().get(), kernel, stride,
                         padding, t_in, t_out, c, width] {
      auto &gx = xi->GradBuffer();
      for (std::size_t t = 0; t < t_out; ++t) {
        for (std::size_t k = 0; k < kernel; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
          const double *dy = yi->grad.data() + t * width + k * c;
          double *g = gx.data() + src * c;
          for (std::size_t j = 0; j < c; ++j) g[j] += dy[j];
        }
      }
    });
  }
  return y;
}

Tensor Conv1d(const Tensor &x, const Tensor &weight, const Tensor &bias,
              std::size_t stride, std::size_t padding) {
  RequireMatrix("conv1d", x, "input");
  RequireMatrix("conv1d", weight, "weight");
  if (weight.cols() % x.cols() != 0) {
    ShapeFail("conv1d", "weight " + ShapeString(weight.shape()) +
                            " is not a whole number of kernel taps over " +
                            std::to_string(x.cols()) + " channels");
  }
  const std::size_t kernel = weight.cols() / x.cols();
  return AddRowVector(MatMulNT(Unfold(x, kernel, stride, padding), weight),
                      bias);
}

Tensor SliceRows(const Tensor &a, std::size_t begin, std::size_t end) {
  RequireMatrix("slice_rows", a, "operand");
  if (begin >= end || end > a.rows()) {
    ShapeFail("slice_rows", "range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " +
                                ShapeString(a.shape()));
  }
  const std::size_t n = a.cols();
  std::vector<double> out(a.data().begin() + begin * n,
                          a.data().begin() + end * n);
  const bool track = Tracks({&a});
  Tensor y = MakeOutput({end - begin, n}, std::move(out), track);
  if (track) {
    Record("slice_rows", y, [ai = a.impl(), yi = y.impl().get(), begin, n] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < yi->grad.size(); ++i) ga[begin * n + i] += yi->grad[i];
    });
  }
  return y;
}

Tensor SliceCols(const Tensor &a, std::size_t begin, std::size_t end) {
  RequireMatrix("slice_cols", a, "operand");
  if (begin >= end || end > a.cols()) {
    ShapeFail("slice_cols", "range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " +
                                ShapeString(a.shape()));
  }
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(a.data().data() + i * n + begin, w, out.data() + i * w);
  }
  const bool track = Tracks({&a});
  Tensor y = MakeOutput({m, w}, std::move(out), track);
  if (track) {
    Record("slice_cols", y, [ai = a.impl(), yi = y.impl().get(), begin, m, n, w] {
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += yi->grad[i * w + j];
      }
    });
  }
  return y;
}

Tensor ConcatRows(std::span<const Tensor> parts) {
  if (parts.empty()) ShapeFail("concat_rows", "no operands");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  for (const Tensor &p : parts) {
    RequireMatrix("concat_rows", p, "operand");
    if (p.cols() != n) {
      ShapeFail("concat_rows", "column extents differ: " +
                                   ShapeString(parts.front().shape()) + " vs " +
                                   ShapeString(p.shape()));
    }
    m += p.rows();
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const Tensor &p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  const bool track = Tracks(parts);
  Tensor y = MakeOutput({m, n}, std::move(out), track);
  if (track) {
    std::vector<ImplPtr> impls;
    for (const Tensor &p : parts) impls.push_back(p.impl());
    Record("concat_rows", y, [impls = std::move(impls), yi = y.impl().get()] {
      std::size_t offset = 0;
      for (const ImplPtr &p : impls) {
        if (auto *g = GradOf(p)) {
          for (std::size_t i = 0; i < p->data.size(); ++i) (*g)[i] += yi->grad[offset + i];
        }
        offset += p->data.size();
      }
    });
  }
  return y;
}

Tensor ConcatCols(std::span<const Tensor> parts) {
  if (parts.empty()) ShapeFail("concat_cols", "no operands");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const Tensor &p : parts) {
    RequireMatrix("concat_cols", p, "operand");
    if (p.rows() != m) {
      ShapeFail("concat_cols", "row extents differ: " +
                                   ShapeString(parts.front().shape()) + " vs " +
                                   ShapeString(p.shape()));
    }
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (const Tensor &p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(p.data().data() + i * w, w, out.data() + i * n + offset);
    }
    offset += w;
  }
  const bool track = Tracks(parts);
  Tensor y = MakeOutput({m, n}, std::move(out), track);
  if (track) {
    std::vector<ImplPtr> impls;
    for (const Tensor &p : parts) impls.push_back(p.impl());
    Record("concat_cols", y, [impls = std::move(impls), yi = y.impl().get(), m, n] {
      std::size_t off = 0;
      for (const ImplPtr &p : impls) {
        const std::size_t w = p->shape.back();
        if (auto *g = GradOf(p)) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < w; ++j) (*g)[i * w + j] += yi->grad[i * n + off + j];
          }
        }
        off += w;
      }
    });
  }
  return y;
}

Tensor Sum(const Tensor &a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const bool track = Tracks({&a});
  Tensor y = MakeOutput({}, {s}, track);
  if (track) {
    Record("sum", y, [ai = a.impl(), yi = y.impl().get()] {
      auto &ga = ai->GradBuffer();
      for (double &g : ga) g += yi->grad[0];
    });
  }
  return y;
}

Tensor Mean(const Tensor &a) {
  return Scale(Sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor Pick(const Tensor &a, std::size_t index) {
  if (index >= a.size()) {
    ShapeFail("pick", "index " + std::to_string(index) + " out of range for " +
                          ShapeString(a.shape()));
  }
  const bool track = Tracks({&a});
  Tensor y = MakeOutput({}, {a[index]}, track);
  if (track) {
    Record("pick", y, [ai = a.impl(), yi = y.impl().get(), index] {
      ai->GradBuffer()[index] += yi->grad[0];
    });
  }
  return y;
}

Tensor WeightedSum(const Tensor &weights, std::span<const Tensor> parts) {
  if (parts.empty()) ShapeFail("weighted_sum", "no operands");
  if (weights.ndim() != 1 || weights.size() != parts.size()) {
    ShapeFail("weighted_sum", "weights " + ShapeString(weights.shape()) +
                                  " for " + std::to_string(parts.size()) +
                                  " operands");
  }
  const Shape &shape = parts.front().shape();
  for (const Tensor &p : parts) RequireSameShape("weighted_sum", parts.front(), p);
  std::vector<double> out(parts.front().size(), 0.0);
  for (std::size_t l = 0; l < parts.size(); ++l) {
    const double w = weights[l];
    const auto d = parts[l].data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * d[i];
  }
  bool track = Tracks(parts) || Tracks({&weights});
  Tensor y = MakeOutput(shape, std::move(out), track);
  if (track) {
    std::vector<ImplPtr> impls;
    for (const Tensor &p : parts) impls.push_back(p.impl());
    Record("weighted_sum", y, [wi = weights.impl(), impls = std::move(impls),
                               yi = y.impl().get()] {
      const auto &dy = yi->grad;
      auto *gw = GradOf(wi);
      for (std::size_t l = 0; l < impls.size(); ++l) {
        const ImplPtr &p = impls[l];
        if (gw) {
          double s = 0.0;
          for (std::size_t i = 0; i < dy.size(); ++i) s += dy[i] * p->data[i];
          (*gw)[l] += s;
        }
        if (auto *g = GradOf(p)) {
          const double w = wi->data[l];
          for (std::size_t i = 0; i < dy.size(); ++i) (*g)[i] += w * dy[i];
        }
      }
    });
  }
  return y;
}

Tensor LogSumExp(const Tensor &a) {
  double mx = kNegInf;
  for (double v : a.data()) mx = std::max(mx, v);
  double value = kNegInf;
  if (mx != kNegInf) {
    double s = 0.0;
    for (double v : a.data()) s += std::exp(v - mx);
    value = mx + std::log(s);
  }
  const bool track = Tracks({&a});
  Tensor y = MakeOutput({}, {value}, track);
  if (track) {
    Record("logsumexp", y, [ai = a.impl(), yi = y.impl().get()] {
      const double out = yi->data[0];
      if (out == kNegInf) return;
      auto &ga = ai->GradBuffer();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += yi->grad[0] * std::exp(ai->data[i] - out);
      }
    });
  }
  return y;
}

Tensor LogSumExp(std::span<const Tensor> parts) {
  if (parts.empty()) ShapeFail("logsumexp", "no operands");
  for (const Tensor &p : parts) RequireSameShape("logsumexp", parts.front(), p);
  const std::size_t n = parts.front().size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = kNegInf;
    for (const Tensor &p : parts) mx = std::max(mx, p[i]);
    if (mx == kNegInf) {
      out[i] = kNegInf;
      continue;
    }
    double s = 0.0;
    for (const Tensor &p : parts) s += std::exp(p[i] - mx);
    out[i] = mx + std::log(s);
  }
  const bool track = Tracks(parts);
  Tensor y = MakeOutput(parts.front().shape(), std::move(out), track);
  if (track) {
    std::vector<ImplPtr> impls;
    for (const Tensor &p : parts) impls.push_back(p.impl());
    Record("logsumexp_n", y, [impls = std::move(impls), yi = y.impl().get()] {
      const auto &dy = yi->grad;
      for (const ImplPtr &p : impls) {
        auto *g = GradOf(p);
        if (!g) continue;
        for (std::size_t i = 0; i < dy.size(); ++i) {
          if (yi->data[i] == kNegInf || dy[i] == 0.0) continue;
          (*g)[i] += dy[i] * std::exp(p->data[i] - yi->data[i]);
        }
      }
    });
  }
  return y;
}

Tensor GatherRow(const Tensor &x, std::size_t row,
                 std::span<const int> indices) {
  RequireMatrix("gather_row", x, "operand");
  const std::size_t n = x.cols();
  if (row >= x.rows()) {
    ShapeFail("gather_row", "row " + std::to_string(row) + " out of range for " +
                                ShapeString(x.shape()));
  }
  if (indices.empty()) ShapeFail("gather_row", "empty index list");
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || static_cast<std::size_t>(indices[i]) >= n) {
      ShapeFail("gather_row", "column " + std::to_string(indices[i]) +
                                  " out of range for " + ShapeString(x.shape()));
    }
    out[i] = x[row * n + indices[i]];
  }
  const bool track = Tracks({&x});
  Tensor y = MakeOutput({indices.size()}, std::move(out), track);
  if (track) {
    Record("gather_row", y, [xi = x.impl(), yi = y.impl().get(), row, n,
                             idx = std::vector<int>(indices.begin(), indices.end())] {
      auto &gx = xi->GradBuffer();
      for (std::size_t i = 0; i < idx.size(); ++i) gx[row * n + idx[i]] += yi->grad[i];
    });
  }
  return y;
}

Tensor ShiftRight(const Tensor &x, std::size_t shift, double fill,
                  std::span<const char> keep) {
  if (x.ndim() != 1) {
    ShapeFail("shift_right", "expects a vector, got " + ShapeString(x.shape()));
  }
  const std::size_t n = x.size();
  if (!keep.empty() && keep.size() != n) {
    ShapeFail("shift_right", "mask of length " + std::to_string(keep.size()) +
                                 " for vector of length " + std::to_string(n));
  }
  auto kept = [&keep, shift](std::size_t i) {
    return i >= shift && (keep.empty() || keep[i]);
  };
  std::vector<double> out(n, fill);
  for (std::size_t i = 0; i < n; ++i) {
    if (kept(i)) out[i] = x[i - shift];
  }
  const bool track = Tracks({&x});
  Tensor y = MakeOutput({n}, std::move(out), track);
  if (track) {
    std::vector<char> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = kept(i);
    Record("shift_right", y, [xi = x.impl(), yi = y.impl().get(), shift,
                              mask = std::move(mask)] {
      auto &gx = xi->GradBuffer();
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) gx[i - shift] += yi->grad[i];
      }
    });
  }
  return y;
}

}  // namespace polyctc::ad
