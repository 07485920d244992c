#pragma once

// Primitive differentiable operations. No implicit broadcasting: the only
// shape adaptation allowed is a scalar (1-element) operand; everything
// else must be reshaped explicitly by the caller.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "spotlight/kernels/kernels.hpp"
#include "spotlight/numerics/tensor.hpp"

namespace spotlight::num {

inline constexpr double kMaskNegInf = -1e9;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

template <typename S>
void check_same_shape(const char* op, const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));
  }
}

}  // namespace detail

// Counter-based dropout stream: the mask for a given (seed, step, op, index)
// is a pure function of the key, so training runs are bitwise reproducible.
struct DropoutRng {
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  std::uint64_t op = 0;

  double uniform(std::uint64_t index) const {
    std::uint64_t h = detail::splitmix64(seed ^ detail::splitmix64(step) ^
                                         detail::splitmix64(op * 0x100000001b3ull + index));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }
};

// ---------------------------------------------------------------------------
// Elementwise / linear algebra
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  // Scalar operand broadcasts; otherwise shapes must match exactly.
  if (b.is_scalar() && !a.is_scalar()) {
    const S c = b.val(0);
    Tensor<S> out = make_output<S>(a.shape, tracked(a) || tracked(b));
    for (std::size_t i = 0; i < a.numel(); ++i) (*out.data)[i] = (*a.data)[i] + c;
    if (out.requires_grad) {
      GradTape<S>::active()->record([a, b, out]() {
        if (a.requires_grad) kern::axpy(S(1), out.grad->data(), a.grad->data(), a.numel());
        if (b.requires_grad) {
          S s = 0;
          for (std::size_t i = 0; i < out.numel(); ++i) s += (*out.grad)[i];
          (*b.grad)[0] += s;
        }
      });
    }
    return out;
  }
  if (a.is_scalar() && !b.is_scalar()) return add(b, a);
  detail::check_same_shape("add", a, b);
  Tensor<S> out = make_output<S>(a.shape, tracked(a) || tracked(b));
  kern::vadd(a.ptr(), b.ptr(), out.mut_ptr(), a.numel());
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, b, out]() {
      if (a.requires_grad) kern::axpy(S(1), out.grad->data(), a.grad->data(), a.numel());
      if (b.requires_grad) kern::axpy(S(1), out.grad->data(), b.grad->data(), b.numel());
    });
  }
  return out;
}

template <typename S>
Tensor<S> multiply(const Tensor<S>& a, const Tensor<S>& b) {
  if (b.is_scalar() && !a.is_scalar()) {
    const S c = b.val(0);
    Tensor<S> out = make_output<S>(a.shape, tracked(a) || tracked(b));
    for (std::size_t i = 0; i < a.numel(); ++i) (*out.data)[i] = (*a.data)[i] * c;
    if (out.requires_grad) {
      GradTape<S>::active()->record([a, b, c, out]() {
        if (a.requires_grad) kern::axpy(c, out.grad->data(), a.grad->data(), a.numel());
        if (b.requires_grad) (*b.grad)[0] += kern::dot(out.grad->data(), a.data->data(), a.numel());
      });
    }
    return out;
  }
  if (a.is_scalar() && !b.is_scalar()) return multiply(b, a);
  detail::check_same_shape("multiply", a, b);
  Tensor<S> out = make_output<S>(a.shape, tracked(a) || tracked(b));
  kern::vmul(a.ptr(), b.ptr(), out.mut_ptr(), a.numel());
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, b, out]() {
      if (a.requires_grad) {
        for (std::size_t i = 0; i < a.numel(); ++i)
          (*a.grad)[i] += (*out.grad)[i] * (*b.data)[i];
      }
      if (b.requires_grad) {
        for (std::size_t i = 0; i < b.numel(); ++i)
          (*b.grad)[i] += (*out.grad)[i] * (*a.data)[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  Tensor<S> out = make_output<S>(a.shape, tracked(a));
  for (std::size_t i = 0; i < a.numel(); ++i) (*out.data)[i] = (*a.data)[i] * c;
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, c, out]() {
      kern::axpy(c, out.grad->data(), a.grad->data(), a.numel());
    });
  }
  return out;
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape) + " x " +
                     shape_str(b.shape));
  }
  const int m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor<S> out = make_output<S>({m, n}, tracked(a) || tracked(b));
  const S* pa = a.ptr();
  const S* pb = b.ptr();
  S* pc = out.mut_ptr();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      kern::axpy(pa[i * k + p], pb + p * n, pc + i * n, static_cast<std::size_t>(n));
    }
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, b, out, m, k, n]() {
      const S* g = out.grad->data();
      if (a.requires_grad) {
        S* ga = a.grad->data();
        const S* pb2 = b.data->data();
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            ga[i * k + p] += kern::dot(g + i * n, pb2 + p * n, static_cast<std::size_t>(n));
          }
        }
      }
      if (b.requires_grad) {
        S* gb = b.grad->data();
        const S* pa2 = a.data->data();
        for (int i = 0; i < m; ++i) {
          for (int p = 0; p < k; ++p) {
            kern::axpy(pa2[i * k + p], g + i * n, gb + p * n, static_cast<std::size_t>(n));
          }
        }
      }
    });
  }
  return out;
}

// rows of `mat` plus `vec` (shape [n] or [1, n]); the explicit bias add.
template <typename S>
Tensor<S> add_rowwise(const Tensor<S>& mat, const Tensor<S>& vec) {
  if (mat.shape.size() != 2) {
    throw ShapeError("add_rowwise: matrix expected, got " + shape_str(mat.shape));
  }
  const int m = mat.shape[0], n = mat.shape[1];
  if (static_cast<int>(vec.numel()) != n) {
    throw ShapeError("add_rowwise: vector " + shape_str(vec.shape) +
                     " does not match matrix " + shape_str(mat.shape));
  }
  Tensor<S> out = make_output<S>(mat.shape, tracked(mat) || tracked(vec));
  for (int i = 0; i < m; ++i) {
    kern::vadd(mat.ptr() + i * n, vec.ptr(), out.mut_ptr() + i * n,
               static_cast<std::size_t>(n));
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([mat, vec, out, m, n]() {
      if (mat.requires_grad) {
        kern::axpy(S(1), out.grad->data(), mat.grad->data(), mat.numel());
      }
      if (vec.requires_grad) {
        for (int i = 0; i < m; ++i) {
          kern::axpy(S(1), out.grad->data() + i * n, vec.grad->data(),
                     static_cast<std::size_t>(n));
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& a, std::vector<int> new_shape) {
  if (Tensor<S>::count(new_shape) != a.numel()) {
    throw ShapeError("reshape: element count mismatch " + shape_str(a.shape) +
                     " -> " + shape_str(new_shape));
  }
  Tensor<S> out = make_output<S>(std::move(new_shape), tracked(a));
  std::copy(a.data->begin(), a.data->end(), out.data->begin());
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out]() {
      kern::axpy(S(1), out.grad->data(), a.grad->data(), a.numel());
    });
  }
  return out;
}

template <typename S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.shape.size() != 2) {
    throw ShapeError("transpose: 2-D tensor expected, got " + shape_str(a.shape));
  }
  const int m = a.shape[0], n = a.shape[1];
  Tensor<S> out = make_output<S>({n, m}, tracked(a));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) (*out.data)[j * m + i] = (*a.data)[i * n + j];
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out, m, n]() {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) (*a.grad)[i * n + j] += (*out.grad)[j * m + i];
    });
  }
  return out;
}

// Concatenation of 2-D tensors along axis 0 (rows) or 1 (columns).
template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& p : parts) {
    if (p.shape.size() != 2) {
      throw ShapeError("concat: 2-D tensors expected, got " + shape_str(p.shape));
    }
    if (p.shape[1 - axis] != parts[0].shape[1 - axis]) {
      throw ShapeError("concat: mismatched shapes " + shape_str(parts[0].shape) +
                       " vs " + shape_str(p.shape));
    }
  }
  bool needs = false;
  int total = 0;
  for (const auto& p : parts) {
    needs = needs || tracked(p);
    total += p.shape[axis];
  }
  std::vector<int> out_shape = parts[0].shape;
  out_shape[axis] = total;
  Tensor<S> out = make_output<S>(out_shape, needs);
  const int on = out.shape[1];
  if (axis == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.data->begin(), p.data->end(), out.data->begin() + off);
      off += p.numel();
    }
  } else {
    const int m = out.shape[0];
    int coff = 0;
    for (const auto& p : parts) {
      const int pn = p.shape[1];
      for (int i = 0; i < m; ++i) {
        std::copy(p.data->begin() + i * pn, p.data->begin() + (i + 1) * pn,
                  out.data->begin() + i * on + coff);
      }
      coff += pn;
    }
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([parts, out, axis]() {
      const int on = out.shape[1];
      if (axis == 0) {
        std::size_t off = 0;
        for (const auto& p : parts) {
          if (p.requires_grad) {
            kern::axpy(S(1), out.grad->data() + off, p.grad->data(), p.numel());
          }
          off += p.numel();
        }
      } else {
        const int m = out.shape[0];
        int coff = 0;
        for (const auto& p : parts) {
          const int pn = p.shape[1];
          if (p.requires_grad) {
            for (int i = 0; i < m; ++i) {
              kern::axpy(S(1), out.grad->data() + i * on + coff,
                         p.grad->data() + i * pn, static_cast<std::size_t>(pn));
            }
          }
          coff += pn;
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> row_slice(const Tensor<S>& a, int r0, int r1) {
  if (a.shape.size() != 2 || r0 < 0 || r1 > a.shape[0] || r0 >= r1) {
    throw ShapeError("row_slice: invalid range [" + std::to_string(r0) + ", " +
                     std::to_string(r1) + ") for " + shape_str(a.shape));
  }
  const int n = a.shape[1];
  Tensor<S> out = make_output<S>({r1 - r0, n}, tracked(a));
  std::copy(a.data->begin() + r0 * n, a.data->begin() + r1 * n, out.data->begin());
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out, r0, n]() {
      kern::axpy(S(1), out.grad->data(), a.grad->data() + r0 * n, out.numel());
    });
  }
  return out;
}

template <typename S>
Tensor<S> col_slice(const Tensor<S>& a, int c0, int c1) {
  if (a.shape.size() != 2 || c0 < 0 || c1 > a.shape[1] || c0 >= c1) {
    throw ShapeError("col_slice: invalid range [" + std::to_string(c0) + ", " +
                     std::to_string(c1) + ") for " + shape_str(a.shape));
  }
  const int m = a.shape[0], n = a.shape[1], w = c1 - c0;
  Tensor<S> out = make_output<S>({m, w}, tracked(a));
  for (int i = 0; i < m; ++i) {
    std::copy(a.data->begin() + i * n + c0, a.data->begin() + i * n + c1,
              out.data->begin() + i * w);
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out, c0, m, n, w]() {
      for (int i = 0; i < m; ++i) {
        kern::axpy(S(1), out.grad->data() + i * w, a.grad->data() + i * n + c0,
                   static_cast<std::size_t>(w));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> gelu(const Tensor<S>& a) {
  Tensor<S> out = make_output<S>(a.shape, tracked(a));
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double x = static_cast<double>((*a.data)[i]);
    (*out.data)[i] = static_cast<S>(0.5 * x * (1.0 + std::erf(x * inv_sqrt2)));
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out]() {
      constexpr double inv_sqrt2 = 0.70710678118654752440;
      constexpr double inv_sqrt2pi = 0.39894228040143267794;
      for (std::size_t i = 0; i < a.numel(); ++i) {
        const double x = static_cast<double>((*a.data)[i]);
        const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
        (*a.grad)[i] += (*out.grad)[i] * static_cast<S>(cdf + x * pdf);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> emax(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_same_shape("emax", a, b);
  Tensor<S> out = make_output<S>(a.shape, tracked(a) || tracked(b));
  for (std::size_t i = 0; i < a.numel(); ++i) {
    (*out.data)[i] = std::max((*a.data)[i], (*b.data)[i]);
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, b, out]() {
      // Ties route the subgradient to the first operand.
      for (std::size_t i = 0; i < a.numel(); ++i) {
        if ((*a.data)[i] >= (*b.data)[i]) {
          if (a.requires_grad) (*a.grad)[i] += (*out.grad)[i];
        } else if (b.requires_grad) {
          (*b.grad)[i] += (*out.grad)[i];
        }
      }
    });
  }
  return out;
}

// Row-wise softmax over the last axis of a 2-D tensor. `valid`, when
// non-empty, flags which columns participate; masked columns get exactly 0.
// Masking is additive -1e9 on the logits before the stable softmax.
template <typename S>
Tensor<S> softmax(const Tensor<S>& a, const std::vector<std::uint8_t>& valid = {}) {
  if (a.shape.size() != 2) {
    throw ShapeError("softmax: 2-D tensor expected, got " + shape_str(a.shape));
  }
  const int m = a.shape[0], n = a.shape[1];
  if (!valid.empty()) {
    if (static_cast<int>(valid.size()) != n) {
      throw ShapeError("softmax: mask size " + std::to_string(valid.size()) +
                       " does not match axis length " + std::to_string(n));
    }
    if (std::find(valid.begin(), valid.end(), std::uint8_t(1)) == valid.end()) {
      throw NumericError("softmax: all entries of the reduced axis are masked");
    }
  }
  Tensor<S> out = make_output<S>(a.shape, tracked(a));
  for (int i = 0; i < m; ++i) {
    const S* row = a.ptr() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      const double x = (!valid.empty() && !valid[j]) ? kMaskNegInf : static_cast<double>(row[j]);
      mx = std::max(mx, x);
    }
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!valid.empty() && !valid[j]) continue;
      z += std::exp(static_cast<double>(row[j]) - mx);
    }
    S* orow = out.mut_ptr() + i * n;
    for (int j = 0; j < n; ++j) {
      orow[j] = (!valid.empty() && !valid[j])
                    ? S(0)
                    : static_cast<S>(std::exp(static_cast<double>(row[j]) - mx) / z);
    }
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out, m, n]() {
      for (int i = 0; i < m; ++i) {
        const S* p = out.data->data() + i * n;
        const S* g = out.grad->data() + i * n;
        const S gp = kern::dot(g, p, static_cast<std::size_t>(n));
        S* ga = a.grad->data() + i * n;
        for (int j = 0; j < n; ++j) ga[j] += p[j] * (g[j] - gp);
      }
    });
  }
  return out;
}

// Softmax with a full [m*n] row-major mask so each row can expose a
// different valid set (causal attention). Masked outputs are exactly 0.
template <typename S>
Tensor<S> softmax_rows(const Tensor<S>& a, const std::vector<std::uint8_t>& valid) {
  if (a.shape.size() != 2) {
    throw ShapeError("softmax_rows: 2-D tensor expected, got " + shape_str(a.shape));
  }
  const int m = a.shape[0], n = a.shape[1];
  if (static_cast<int>(valid.size()) != m * n) {
    throw ShapeError("softmax_rows: mask size " + std::to_string(valid.size()) +
                     " does not match " + shape_str(a.shape));
  }
  Tensor<S> out = make_output<S>(a.shape, tracked(a));
  for (int i = 0; i < m; ++i) {
    const S* row = a.ptr() + i * n;
    const std::uint8_t* vrow = valid.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (int j = 0; j < n; ++j) {
      if (!vrow[j]) continue;
      any = true;
      mx = std::max(mx, static_cast<double>(row[j]));
    }
    if (!any) {
      throw NumericError("softmax_rows: row " + std::to_string(i) + " is fully masked");
    }
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      if (vrow[j]) z += std::exp(static_cast<double>(row[j]) - mx);
    }
    S* orow = out.mut_ptr() + i * n;
    for (int j = 0; j < n; ++j) {
      orow[j] = vrow[j] ? static_cast<S>(std::exp(static_cast<double>(row[j]) - mx) / z)
                        : S(0);
    }
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out, m, n]() {
      for (int i = 0; i < m; ++i) {
        const S* p = out.data->data() + i * n;
        const S* g = out.grad->data() + i * n;
        const S gp = kern::dot(g, p, static_cast<std::size_t>(n));
        S* ga = a.grad->data() + i * n;
        for (int j = 0; j < n; ++j) ga[j] += p[j] * (g[j] - gp);
      }
    });
  }
  return out;
}

// Layer normalization over the last axis with learned gain/bias vectors.
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& a, const Tensor<S>& gain, const Tensor<S>& bias,
                     double eps = 1e-5) {
  if (a.shape.size() != 2) {
    throw ShapeError("layer_norm: 2-D tensor expected, got " + shape_str(a.shape));
  }
  const int m = a.shape[0], n = a.shape[1];
  if (static_cast<int>(gain.numel()) != n || static_cast<int>(bias.numel()) != n) {
    throw ShapeError("layer_norm: gain/bias " + shape_str(gain.shape) + "/" +
                     shape_str(bias.shape) + " do not match axis length " +
                     std::to_string(n));
  }
  Tensor<S> out = make_output<S>(a.shape, tracked(a) || tracked(gain) || tracked(bias));
  auto xhat = std::make_shared<std::vector<S>>(a.numel());
  auto inv_std = std::make_shared<std::vector<S>>(m);
  for (int i = 0; i < m; ++i) {
    const S* row = a.ptr() + i * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= n;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = static_cast<S>(istd);
    for (int j = 0; j < n; ++j) {
      const S xh = static_cast<S>((row[j] - mean) * istd);
      (*xhat)[i * n + j] = xh;
      (*out.data)[i * n + j] = xh * (*gain.data)[j] + (*bias.data)[j];
    }
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, gain, bias, out, xhat, inv_std, m, n]() {
      for (int i = 0; i < m; ++i) {
        const S* g = out.grad->data() + i * n;
        const S* xh = xhat->data() + i * n;
        if (gain.requires_grad) {
          for (int j = 0; j < n; ++j) (*gain.grad)[j] += g[j] * xh[j];
        }
        if (bias.requires_grad) {
          for (int j = 0; j < n; ++j) (*bias.grad)[j] += g[j];
        }
        if (a.requires_grad) {
          // d xhat
          std::vector<S> dxh(n);
          for (int j = 0; j < n; ++j) dxh[j] = g[j] * (*gain.data)[j];
          S sum_dxh = 0, sum_dxh_xh = 0;
          for (int j = 0; j < n; ++j) {
            sum_dxh += dxh[j];
            sum_dxh_xh += dxh[j] * xh[j];
          }
          const S istd = (*inv_std)[i];
          S* ga = a.grad->data() + i * n;
          for (int j = 0; j < n; ++j) {
            ga[j] += istd * (dxh[j] - sum_dxh / S(n) - xh[j] * sum_dxh_xh / S(n));
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings, dropout, reductions
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& ids) {
  if (table.shape.size() != 2) {
    throw ShapeError("embedding_lookup: table must be 2-D, got " + shape_str(table.shape));
  }
  const int v = table.shape[0], d = table.shape[1];
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ShapeError("embedding_lookup: id " + std::to_string(id) +
                       " out of range for table " + shape_str(table.shape));
    }
  }
  Tensor<S> out = make_output<S>({static_cast<int>(ids.size()), d}, tracked(table));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy(table.data->begin() + ids[i] * d, table.data->begin() + (ids[i] + 1) * d,
              out.data->begin() + i * d);
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([table, out, ids, d]() {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        kern::axpy(S(1), out.grad->data() + i * d, table.grad->data() + ids[i] * d,
                   static_cast<std::size_t>(d));
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> dropout(const Tensor<S>& a, double rate, bool train, DropoutRng& rng) {
  const std::uint64_t op_id = rng.op++;
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) throw NumericError("dropout: rate must be < 1");
  Tensor<S> out = make_output<S>(a.shape, tracked(a));
  auto keep = std::make_shared<std::vector<std::uint8_t>>(a.numel());
  const S inv_keep = static_cast<S>(1.0 / (1.0 - rate));
  DropoutRng key = rng;
  key.op = op_id;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const bool k = key.uniform(i) >= rate;
    (*keep)[i] = k;
    (*out.data)[i] = k ? (*a.data)[i] * inv_keep : S(0);
  }
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out, keep, inv_keep]() {
      for (std::size_t i = 0; i < a.numel(); ++i) {
        if ((*keep)[i]) (*a.grad)[i] += (*out.grad)[i] * inv_keep;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& a) {
  Tensor<S> out = make_output<S>({1}, tracked(a));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += (*a.data)[i];
  (*out.data)[0] = static_cast<S>(acc);
  if (out.requires_grad) {
    GradTape<S>::active()->record([a, out]() {
      const S g = (*out.grad)[0];
      for (std::size_t i = 0; i < a.numel(); ++i) (*a.grad)[i] += g;
    });
  }
  return out;
}

// Mean negative log-likelihood of `targets` under `logits` ([T, V]),
// averaged over positions where loss_mask is 1.
template <typename S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<int>& targets,
                        const std::vector<std::uint8_t>& loss_mask) {
  if (logits.shape.size() != 2) {
    throw ShapeError("cross_entropy: logits must be 2-D, got " + shape_str(logits.shape));
  }
  const int t = logits.shape[0], v = logits.shape[1];
  if (static_cast<int>(targets.size()) != t ||
      (!loss_mask.empty() && static_cast<int>(loss_mask.size()) != t)) {
    throw ShapeError("cross_entropy: targets/mask length does not match " +
                     std::to_string(t) + " positions");
  }
  int active = 0;
  for (int i = 0; i < t; ++i) {
    if (loss_mask.empty() || loss_mask[i]) ++active;
  }
  if (active == 0) throw NumericError("cross_entropy: every position is masked");
  for (int i = 0; i < t; ++i) {
    if (targets[i] < 0 || targets[i] >= v) {
      throw ShapeError("cross_entropy: target id " + std::to_string(targets[i]) +
                       " out of vocabulary " + std::to_string(v));
    }
  }
  Tensor<S> out = make_output<S>({1}, tracked(logits));
  auto probs = std::make_shared<std::vector<S>>(logits.numel());
  double total = 0.0;
  for (int i = 0; i < t; ++i) {
    const S* row = logits.ptr() + i * v;
    double mx = row[0];
    for (int j = 1; j < v; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double z = 0.0;
    for (int j = 0; j < v; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    const double logz = std::log(z) + mx;
    for (int j = 0; j < v; ++j) {
      (*probs)[i * v + j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - logz));
    }
    if (loss_mask.empty() || loss_mask[i]) {
      total += logz - static_cast<double>(row[targets[i]]);
    }
  }
  (*out.data)[0] = static_cast<S>(total / active);
  if (out.requires_grad) {
    GradTape<S>::active()->record([logits, out, probs, targets, loss_mask, t, v, active]() {
      const S g = (*out.grad)[0] / static_cast<S>(active);
      for (int i = 0; i < t; ++i) {
        if (!loss_mask.empty() && !loss_mask[i]) continue;
        S* grow = logits.grad->data() + i * v;
        const S* prow = probs->data() + i * v;
        kern::axpy(g, prow, grow, static_cast<std::size_t>(v));
        grow[targets[i]] -= g;
      }
    });
  }
  return out;
}

}  // namespace spotlight::num
