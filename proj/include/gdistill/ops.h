// gdistill/ops.h

// Copyright 2026  gdistill authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef GDISTILL_OPS_H_
#define GDISTILL_OPS_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "gdistill/tensor.h"

namespace gdistill {

// Differentiable operations over Tensor<T>.
//
// Temporal tensors are (C, T) or batched (B, C, T); convolution weights are
// (C_out, C_in, K). Ops accepting a temporal tensor handle both ranks and
// produce a result of matching rank. All gradients accumulate (+=) so shared
// subgraphs combine correctly.

// Forward-only evaluation: while a NoGradGuard is alive on this thread, op
// results carry no graph edges or backward closures.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(Enabled()) { Enabled() = true; }
  ~NoGradGuard() { Enabled() = prev_; }
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;
  static bool &Enabled() {
    thread_local bool flag = false;
    return flag;
  }

 private:
  bool prev_;
};

namespace detail {

inline int64_t DivFloor(int64_t a, int64_t b) {
  int64_t q = a / b, r = a % b;
  return (r != 0 && r < 0) ? q - 1 : q;
}
inline int64_t DivCeil(int64_t a, int64_t b) { return -DivFloor(-a, b); }

template <typename T>
Tensor<T> MakeNode(std::vector<int64_t> shape, std::vector<T> values,
                   std::vector<std::shared_ptr<TensorImpl<T>>> parents,
                   std::function<void(TensorImpl<T> &)> backward_fn) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->id = NextNodeId();
  if (!NoGradGuard::Enabled()) {
    for (const auto &p : parents)
      if (p->requires_grad) impl->requires_grad = true;
    if (impl->requires_grad) {
      impl->parents = std::move(parents);
      impl->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor<T>(std::move(impl));
}

// Shape view for (C, T) / (B, C, T) temporal tensors.
struct TemporalView {
  int64_t batch, chan, time;
  bool batched;
};

template <typename T>
TemporalView ViewTemporal(const Tensor<T> &x, const char *op) {
  if (x.Rank() == 2) return {1, x.Dim(0), x.Dim(1), false};
  if (x.Rank() == 3) return {x.Dim(0), x.Dim(1), x.Dim(2), true};
  throw ShapeError(
      Cat(op, ": expected (C,T) or (B,C,T) input, got ", ShapeStr(x.Shape())));
}

// Shape view for (C, H, W) / (B, C, H, W) image tensors.
struct SpatialView {
  int64_t batch, chan, height, width;
  bool batched;
};

template <typename T>
SpatialView ViewSpatial(const Tensor<T> &x, const char *op) {
  if (x.Rank() == 3) return {1, x.Dim(0), x.Dim(1), x.Dim(2), false};
  if (x.Rank() == 4) return {x.Dim(0), x.Dim(1), x.Dim(2), x.Dim(3), true};
  throw ShapeError(Cat(op, ": expected (C,H,W) or (B,C,H,W) input, got ",
                       ShapeStr(x.Shape())));
}

template <typename T>
void CheckSameShape(const Tensor<T> &a, const Tensor<T> &b, const char *op) {
  if (a.Shape() != b.Shape())
    throw ShapeError(Cat(op, ": operand shapes differ: ", ShapeStr(a.Shape()),
                         " vs ", ShapeStr(b.Shape())));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

template <typename T>
Tensor<T> Add(const Tensor<T> &a, const Tensor<T> &b) {
  detail::CheckSameShape(a, b, "Add");
  std::vector<T> out(a.Values().begin(), a.Values().end());
  auto bv = b.Values();
  for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return detail::MakeNode<T>(
      a.Shape(), std::move(out), {a.impl(), b.impl()},
      [](TensorImpl<T> &self) {
        for (int side = 0; side < 2; ++side) {
          auto &p = self.parents[side];
          if (!p->requires_grad) continue;
          for (size_t i = 0; i < self.grad.size(); ++i)
            p->grad[i] += self.grad[i];
        }
      });
}

template <typename T>
Tensor<T> Mul(const Tensor<T> &a, const Tensor<T> &b) {
  detail::CheckSameShape(a, b, "Mul");
  auto av = a.Values(), bv = b.Values();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return detail::MakeNode<T>(
      a.Shape(), std::move(out), {a.impl(), b.impl()},
      [](TensorImpl<T> &self) {
        auto &pa = self.parents[0];
        auto &pb = self.parents[1];
        if (pa->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            pa->grad[i] += self.grad[i] * pb->values[i];
        if (pb->requires_grad)
          for (size_t i = 0; i < self.grad.size(); ++i)
            pb->grad[i] += self.grad[i] * pa->values[i];
      });
}

// Gradient passes only where the input is strictly positive.
template <typename T>
Tensor<T> Relu(const Tensor<T> &a) {
  auto av = a.Values();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
  return detail::MakeNode<T>(a.Shape(), std::move(out), {a.impl()},
                             [](TensorImpl<T> &self) {
                               auto &p = self.parents[0];
                               if (!p->requires_grad) return;
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 if (p->values[i] > T(0))
                                   p->grad[i] += self.grad[i];
                             });
}

// Multiply by a compile-time-constant scalar (not a graph node).
template <typename T>
Tensor<T> Scale(const Tensor<T> &a, T factor) {
  auto av = a.Values();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return detail::MakeNode<T>(a.Shape(), std::move(out), {a.impl()},
                             [factor](TensorImpl<T> &self) {
                               auto &p = self.parents[0];
                               if (!p->requires_grad) return;
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 p->grad[i] += self.grad[i] * factor;
                             });
}

template <typename T>
Tensor<T> Sum(const Tensor<T> &a) {
  T acc = 0;
  for (T v : a.Values()) acc += v;
  return detail::MakeNode<T>({1}, {acc}, {a.impl()}, [](TensorImpl<T> &self) {
    auto &p = self.parents[0];
    if (!p->requires_grad) return;
    T g = self.grad[0];
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += g;
  });
}

// Inner product of two equal-length vectors; returns a scalar node.
template <typename T>
Tensor<T> Dot(const Tensor<T> &a, const Tensor<T> &b) {
  if (a.Rank() != 1 || b.Rank() != 1 || a.Dim(0) != b.Dim(0))
    throw ShapeError(Cat("Dot: vector lengths differ: ", ShapeStr(a.Shape()),
                         " vs ", ShapeStr(b.Shape())));
  auto av = a.Values(), bv = b.Values();
  T acc = 0;
  for (size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return detail::MakeNode<T>(
      {1}, {acc}, {a.impl(), b.impl()}, [](TensorImpl<T> &self) {
        auto &pa = self.parents[0];
        auto &pb = self.parents[1];
        T g = self.grad[0];
        if (pa->requires_grad)
          for (size_t i = 0; i < pa->grad.size(); ++i)
            pa->grad[i] += g * pb->values[i];
        if (pb->requires_grad)
          for (size_t i = 0; i < pb->grad.size(); ++i)
            pb->grad[i] += g * pa->values[i];
      });
}

// Row `index` of a (N, D) tensor as a (D,) view copy.
template <typename T>
Tensor<T> SelectRow(const Tensor<T> &x, int64_t index) {
  if (x.Rank() != 2)
    throw ShapeError(
        Cat("SelectRow: expected rank-2 tensor, got ", ShapeStr(x.Shape())));
  int64_t rows = x.Dim(0), cols = x.Dim(1);
  if (index < 0 || index >= rows)
    throw ShapeError(Cat("SelectRow: index ", index, " out of range [0,", rows, ")"));
  auto xv = x.Values();
  std::vector<T> out(xv.begin() + index * cols, xv.begin() + (index + 1) * cols);
  return detail::MakeNode<T>(
      {cols}, std::move(out), {x.impl()}, [index, cols](TensorImpl<T> &self) {
        auto &p = self.parents[0];
        if (!p->requires_grad) return;
        for (int64_t j = 0; j < cols; ++j)
          p->grad[index * cols + j] += self.grad[j];
      });
}

// ---------------------------------------------------------------------------
// Linear: y = x W^T + b with x (N, in) or (in,), W (out, in), b (out).

template <typename T>
Tensor<T> Linear(const Tensor<T> &x, const Tensor<T> &weight,
                 const Tensor<T> &bias) {
  if (weight.Rank() != 2)
    throw ShapeError(Cat("Linear: weight must be (out,in), got ",
                         ShapeStr(weight.Shape())));
  int64_t out_dim = weight.Dim(0), in_dim = weight.Dim(1);
  if (bias.Rank() != 1 || bias.Dim(0) != out_dim)
    throw ShapeError(Cat("Linear: bias shape ", ShapeStr(bias.Shape()),
                         " does not match out dim ", out_dim));
  bool batched = x.Rank() == 2;
  int64_t n = batched ? x.Dim(0) : 1;
  int64_t xin = batched ? x.Dim(1) : (x.Rank() == 1 ? x.Dim(0) : -1);
  if (xin != in_dim)
    throw ShapeError(Cat("Linear: input shape ", ShapeStr(x.Shape()),
                         " does not match weight ", ShapeStr(weight.Shape())));
  auto xv = x.Values();
  auto wv = weight.Values();
  auto bv = bias.Values();
  std::vector<T> out(static_cast<size_t>(n) * out_dim);
  for (int64_t r = 0; r < n; ++r) {
    const T *xr = xv.data() + r * in_dim;
    T *yr = out.data() + r * out_dim;
    for (int64_t o = 0; o < out_dim; ++o) {
      const T *wr = wv.data() + o * in_dim;
      T acc = bv[o];
      for (int64_t i = 0; i < in_dim; ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  }
  std::vector<int64_t> out_shape =
      batched ? std::vector<int64_t>{n, out_dim} : std::vector<int64_t>{out_dim};
  return detail::MakeNode<T>(
      std::move(out_shape), std::move(out),
      {x.impl(), weight.impl(), bias.impl()},
      [n, in_dim, out_dim](TensorImpl<T> &self) {
        auto &px = self.parents[0];
        auto &pw = self.parents[1];
        auto &pb = self.parents[2];
        for (int64_t r = 0; r < n; ++r) {
          const T *g = self.grad.data() + r * out_dim;
          const T *xr = px->values.data() + r * in_dim;
          if (pb->requires_grad)
            for (int64_t o = 0; o < out_dim; ++o) pb->grad[o] += g[o];
          if (pw->requires_grad)
            for (int64_t o = 0; o < out_dim; ++o) {
              T *wg = pw->grad.data() + o * in_dim;
              T go = g[o];
              for (int64_t i = 0; i < in_dim; ++i) wg[i] += go * xr[i];
            }
          if (px->requires_grad) {
            T *xg = px->grad.data() + r * in_dim;
            for (int64_t o = 0; o < out_dim; ++o) {
              const T *wr = pw->values.data() + o * in_dim;
              T go = g[o];
              for (int64_t i = 0; i < in_dim; ++i) xg[i] += go * wr[i];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// 1-D convolution with zero padding.
//
// input (C_in, T) or (B, C_in, T); weight (C_out, C_in, K); bias (C_out).
// A default-constructed bias tensor means no bias term; layers feeding
// straight into batch norm use that form, since the norm would cancel the
// shift anyway and a parameter without influence has no testable gradient.
// T_out = floor((T + 2*pad - K) / stride) + 1.

template <typename T>
Tensor<T> Conv1d(const Tensor<T> &input, const Tensor<T> &weight,
                 const Tensor<T> &bias, int64_t stride, int64_t pad) {
  if (stride < 1 || pad < 0)
    throw ConfigError(Cat("Conv1d: stride must be >=1 and pad >=0, got stride=",
                          stride, " pad=", pad));
  if (weight.Rank() != 3)
    throw ShapeError(Cat("Conv1d: weight must be (C_out,C_in,K), got ",
                         ShapeStr(weight.Shape())));
  auto v = detail::ViewTemporal(input, "Conv1d");
  int64_t c_out = weight.Dim(0), c_in = weight.Dim(1), k = weight.Dim(2);
  if (k < 1) throw ShapeError("Conv1d: kernel length must be >= 1");
  if (c_in != v.chan)
    throw ShapeError(Cat("Conv1d: input channels ", v.chan,
                         " do not match weight ", ShapeStr(weight.Shape())));
  const bool has_bias = bias.Defined();
  if (has_bias && (bias.Rank() != 1 || bias.Dim(0) != c_out))
    throw ShapeError(Cat("Conv1d: bias shape ", ShapeStr(bias.Shape()),
                         " does not match C_out ", c_out));
  if (v.time + 2 * pad < k)
    throw ShapeError(Cat("Conv1d: no valid window: T=", v.time, " pad=", pad,
                         " K=", k));
  const int64_t t_in = v.time;
  const int64_t t_out = (t_in + 2 * pad - k) / stride + 1;

  auto xv = input.Values();
  auto wv = weight.Values();
  std::vector<T> out(static_cast<size_t>(v.batch) * c_out * t_out);
  for (int64_t b = 0; b < v.batch; ++b) {
    const T *xb = xv.data() + b * v.chan * t_in;
    T *yb = out.data() + b * c_out * t_out;
    for (int64_t co = 0; co < c_out; ++co) {
      T *yr = yb + co * t_out;
      std::fill(yr, yr + t_out, has_bias ? bias.Values()[co] : T(0));
      for (int64_t ci = 0; ci < c_in; ++ci) {
        const T *xr = xb + ci * t_in;
        const T *wr = wv.data() + (co * c_in + ci) * k;
        for (int64_t kk = 0; kk < k; ++kk) {
          const T w = wr[kk];
          const int64_t off = kk - pad;
          int64_t lo = off < 0 ? detail::DivCeil(-off, stride) : 0;
          int64_t hi = std::min(t_out - 1, detail::DivFloor(t_in - 1 - off, stride));
          if (stride == 1) {
            const T *xs = xr + off;
            for (int64_t t = lo; t <= hi; ++t) yr[t] += w * xs[t];
          } else {
            for (int64_t t = lo; t <= hi; ++t) yr[t] += w * xr[t * stride + off];
          }
        }
      }
    }
  }
  std::vector<int64_t> out_shape =
      v.batched ? std::vector<int64_t>{v.batch, c_out, t_out}
                : std::vector<int64_t>{c_out, t_out};
  auto bw = [v, c_out, c_in, k, stride, pad, t_in, t_out,
             has_bias](TensorImpl<T> &self) {
    auto &px = self.parents[0];
    auto &pw = self.parents[1];
    TensorImpl<T> *pb = has_bias ? self.parents[2].get() : nullptr;
    for (int64_t b = 0; b < v.batch; ++b) {
      const T *gb = self.grad.data() + b * c_out * t_out;
      const T *xb = px->values.data() + b * c_in * t_in;
      for (int64_t co = 0; co < c_out; ++co) {
        const T *gr = gb + co * t_out;
        if (pb && pb->requires_grad) {
          T acc = 0;
          for (int64_t t = 0; t < t_out; ++t) acc += gr[t];
          pb->grad[co] += acc;
        }
        for (int64_t ci = 0; ci < c_in; ++ci) {
          const T *xr = xb + ci * t_in;
          const T *wr = pw->values.data() + (co * c_in + ci) * k;
          T *wg = pw->requires_grad ? pw->grad.data() + (co * c_in + ci) * k
                                    : nullptr;
          T *xg = px->requires_grad ? px->grad.data() + (b * c_in + ci) * t_in
                                    : nullptr;
          for (int64_t kk = 0; kk < k; ++kk) {
            const int64_t off = kk - pad;
            int64_t lo = off < 0 ? detail::DivCeil(-off, stride) : 0;
            int64_t hi =
                std::min(t_out - 1, detail::DivFloor(t_in - 1 - off, stride));
            if (wg) {
              T acc = 0;
              if (stride == 1) {
                const T *xs = xr + off;
                for (int64_t t = lo; t <= hi; ++t) acc += gr[t] * xs[t];
              } else {
                for (int64_t t = lo; t <= hi; ++t)
                  acc += gr[t] * xr[t * stride + off];
              }
              wg[kk] += acc;
            }
            if (xg) {
              const T w = wr[kk];
              if (stride == 1) {
                T *xs = xg + off;
                for (int64_t t = lo; t <= hi; ++t) xs[t] += w * gr[t];
              } else {
                for (int64_t t = lo; t <= hi; ++t)
                  xg[t * stride + off] += w * gr[t];
              }
            }
          }
        }
      }
    }
  };
  std::vector<std::shared_ptr<TensorImpl<T>>> parents = {input.impl(),
                                                         weight.impl()};
  if (has_bias) parents.push_back(bias.impl());
  return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                             std::move(parents), std::move(bw));
}

// ---------------------------------------------------------------------------
// 2-D convolution (square stride/pad), for the compact image branch.
//
// input (C_in, H, W) or (B, C_in, H, W); weight (C_out, C_in, KH, KW).
// As with Conv1d, a default-constructed bias tensor omits the bias term.

template <typename T>
Tensor<T> Conv2d(const Tensor<T> &input, const Tensor<T> &weight,
                 const Tensor<T> &bias, int64_t stride, int64_t pad) {
  if (stride < 1 || pad < 0)
    throw ConfigError(Cat("Conv2d: stride must be >=1 and pad >=0, got stride=",
                          stride, " pad=", pad));
  if (weight.Rank() != 4)
    throw ShapeError(Cat("Conv2d: weight must be (C_out,C_in,KH,KW), got ",
                         ShapeStr(weight.Shape())));
  auto v = detail::ViewSpatial(input, "Conv2d");
  int64_t c_out = weight.Dim(0), c_in = weight.Dim(1);
  int64_t kh = weight.Dim(2), kw = weight.Dim(3);
  if (c_in != v.chan)
    throw ShapeError(Cat("Conv2d: input channels ", v.chan,
                         " do not match weight ", ShapeStr(weight.Shape())));
  const bool has_bias = bias.Defined();
  if (has_bias && (bias.Rank() != 1 || bias.Dim(0) != c_out))
    throw ShapeError(Cat("Conv2d: bias shape ", ShapeStr(bias.Shape()),
                         " does not match C_out ", c_out));
  if (v.height + 2 * pad < kh || v.width + 2 * pad < kw)
    throw ShapeError(Cat("Conv2d: no valid window: H=", v.height, " W=", v.width,
                         " pad=", pad, " K=", kh, "x", kw));
  const int64_t h_in = v.height, w_in = v.width;
  const int64_t h_out = (h_in + 2 * pad - kh) / stride + 1;
  const int64_t w_out = (w_in + 2 * pad - kw) / stride + 1;

  auto xv = input.Values();
  auto wv = weight.Values();
  std::vector<T> out(static_cast<size_t>(v.batch) * c_out * h_out * w_out);
  for (int64_t b = 0; b < v.batch; ++b) {
    const T *xb = xv.data() + b * c_in * h_in * w_in;
    T *yb = out.data() + b * c_out * h_out * w_out;
    for (int64_t co = 0; co < c_out; ++co) {
      T *yp = yb + co * h_out * w_out;
      std::fill(yp, yp + h_out * w_out, has_bias ? bias.Values()[co] : T(0));
      for (int64_t ci = 0; ci < c_in; ++ci) {
        const T *xp = xb + ci * h_in * w_in;
        const T *wp = wv.data() + ((co * c_in + ci) * kh) * kw;
        for (int64_t y = 0; y < h_out; ++y) {
          for (int64_t ky = 0; ky < kh; ++ky) {
            int64_t iy = y * stride + ky - pad;
            if (iy < 0 || iy >= h_in) continue;
            const T *xrow = xp + iy * w_in;
            const T *wrow = wp + ky * kw;
            T *yrow = yp + y * w_out;
            for (int64_t kx = 0; kx < kw; ++kx) {
              const T w = wrow[kx];
              const int64_t off = kx - pad;
              int64_t lo = off < 0 ? detail::DivCeil(-off, stride) : 0;
              int64_t hi =
                  std::min(w_out - 1, detail::DivFloor(w_in - 1 - off, stride));
              for (int64_t x = lo; x <= hi; ++x)
                yrow[x] += w * xrow[x * stride + off];
            }
          }
        }
      }
    }
  }
  std::vector<int64_t> out_shape =
      v.batched ? std::vector<int64_t>{v.batch, c_out, h_out, w_out}
                : std::vector<int64_t>{c_out, h_out, w_out};
  auto bw = [v, c_out, c_in, kh, kw, stride, pad, h_in, w_in, h_out, w_out,
             has_bias](TensorImpl<T> &self) {
    auto &px = self.parents[0];
    auto &pw = self.parents[1];
    TensorImpl<T> *pb = has_bias ? self.parents[2].get() : nullptr;
    for (int64_t b = 0; b < v.batch; ++b) {
      const T *gb = self.grad.data() + b * c_out * h_out * w_out;
      const T *xb = px->values.data() + b * c_in * h_in * w_in;
      for (int64_t co = 0; co < c_out; ++co) {
        const T *gp = gb + co * h_out * w_out;
        if (pb && pb->requires_grad) {
          T acc = 0;
          for (int64_t i = 0; i < h_out * w_out; ++i) acc += gp[i];
          pb->grad[co] += acc;
        }
        for (int64_t ci = 0; ci < c_in; ++ci) {
          const T *xp = xb + ci * h_in * w_in;
          const T *wp = pw->values.data() + ((co * c_in + ci) * kh) * kw;
          T *wgp = pw->requires_grad
                       ? pw->grad.data() + ((co * c_in + ci) * kh) * kw
                       : nullptr;
          T *xgp = px->requires_grad
                       ? px->grad.data() + (b * c_in + ci) * h_in * w_in
                       : nullptr;
          for (int64_t y = 0; y < h_out; ++y) {
            for (int64_t ky = 0; ky < kh; ++ky) {
              int64_t iy = y * stride + ky - pad;
              if (iy < 0 || iy >= h_in) continue;
              const T *xrow = xp + iy * w_in;
              const T *grow = gp + y * w_out;
              for (int64_t kx = 0; kx < kw; ++kx) {
                const int64_t off = kx - pad;
                int64_t lo = off < 0 ? detail::DivCeil(-off, stride) : 0;
                int64_t hi = std::min(w_out - 1,
                                      detail::DivFloor(w_in - 1 - off, stride));
                if (wgp) {
                  T acc = 0;
                  for (int64_t x = lo; x <= hi; ++x)
                    acc += grow[x] * xrow[x * stride + off];
                  wgp[ky * kw + kx] += acc;
                }
                if (xgp) {
                  const T w = wp[ky * kw + kx];
                  T *xgrow = xgp + iy * w_in;
                  for (int64_t x = lo; x <= hi; ++x)
                    xgrow[x * stride + off] += w * grow[x];
                }
              }
            }
          }
        }
      }
    }
  };
  std::vector<std::shared_ptr<TensorImpl<T>>> parents = {input.impl(),
                                                         weight.impl()};
  if (has_bias) parents.push_back(bias.impl());
  return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                             std::move(parents), std::move(bw));
}

// ---------------------------------------------------------------------------
// Max pooling over time, ceil semantics: the last window may be short, so
// T_out = ceil(T / stride) when width == stride.

template <typename T>
Tensor<T> MaxPool1d(const Tensor<T> &input, int64_t width, int64_t stride) {
  if (width < 1 || stride < 1)
    throw ConfigError(Cat("MaxPool1d: width and stride must be >=1, got width=",
                          width, " stride=", stride));
  auto v = detail::ViewTemporal(input, "MaxPool1d");
  const int64_t t_in = v.time;
  const int64_t t_out = std::max<int64_t>(1, detail::DivCeil(t_in - width, stride) + 1);
  auto xv = input.Values();
  std::vector<T> out(static_cast<size_t>(v.batch) * v.chan * t_out);
  std::vector<int64_t> argmax(out.size());
  for (int64_t b = 0; b < v.batch; ++b) {
    for (int64_t c = 0; c < v.chan; ++c) {
      const T *xr = xv.data() + (b * v.chan + c) * t_in;
      T *yr = out.data() + (b * v.chan + c) * t_out;
      int64_t *ar = argmax.data() + (b * v.chan + c) * t_out;
      for (int64_t t = 0; t < t_out; ++t) {
        int64_t begin = t * stride;
        int64_t end = std::min(begin + width, t_in);
        int64_t best = begin;
        for (int64_t i = begin + 1; i < end; ++i)
          if (xr[i] > xr[best]) best = i;  // ties keep the earliest frame
        yr[t] = xr[best];
        ar[t] = best;
      }
    }
  }
  std::vector<int64_t> out_shape =
      v.batched ? std::vector<int64_t>{v.batch, v.chan, t_out}
                : std::vector<int64_t>{v.chan, t_out};
  auto bw = [v, t_in, t_out, argmax = std::move(argmax)](TensorImpl<T> &self) {
    auto &p = self.parents[0];
    if (!p->requires_grad) return;
    for (int64_t bc = 0; bc < v.batch * v.chan; ++bc) {
      const T *gr = self.grad.data() + bc * t_out;
      const int64_t *ar = argmax.data() + bc * t_out;
      T *xg = p->grad.data() + bc * t_in;
      for (int64_t t = 0; t < t_out; ++t) xg[ar[t]] += gr[t];
    }
  };
  return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                             {input.impl()}, std::move(bw));
}

// ---------------------------------------------------------------------------
// Batch normalization over channels of a temporal tensor.

enum class BnMode { kTrain, kInfer };

template <typename T>
struct RunningStats {
  std::vector<T> mean, var;
  bool initialized = false;

  static RunningStats Fresh(int64_t channels) {
    RunningStats s;
    s.mean.assign(channels, T(0));
    s.var.assign(channels, T(1));
    s.initialized = true;
    return s;
  }
};

// Train mode normalizes each channel over (batch x time), updates the running
// stats with `momentum`, and applies the affine transform. Infer mode uses the
// running stats; it requires them to be populated. Running-variance updates use
// the unbiased estimate, matching the usual convention.
template <typename T>
Tensor<T> BatchNorm1d(const Tensor<T> &input, const Tensor<T> &gamma,
                      const Tensor<T> &beta, RunningStats<T> &stats,
                      BnMode mode, T momentum = T(0.1), T eps = T(1e-5)) {
  if (!(eps > T(0))) throw ConfigError("BatchNorm1d: eps must be > 0");
  auto v = detail::ViewTemporal(input, "BatchNorm1d");
  const int64_t c = v.chan, t_in = v.time, batch = v.batch;
  if (gamma.Rank() != 1 || gamma.Dim(0) != c || beta.Rank() != 1 ||
      beta.Dim(0) != c)
    throw ShapeError(Cat("BatchNorm1d: gamma/beta shapes ",
                         ShapeStr(gamma.Shape()), "/", ShapeStr(beta.Shape()),
                         " do not match channels ", c));
  const int64_t n = batch * t_in;  // reduce-set size per channel
  auto xv = input.Values();
  auto gv = gamma.Values();
  auto bv = beta.Values();

  std::vector<T> out(xv.size());
  std::vector<int64_t> out_shape(input.Shape().begin(), input.Shape().end());

  if (mode == BnMode::kInfer) {
    if (!stats.initialized || static_cast<int64_t>(stats.mean.size()) != c)
      throw NumericError(
          "BatchNorm1d: inference requires populated running stats");
    std::vector<T> inv_std(c);
    for (int64_t ch = 0; ch < c; ++ch)
      inv_std[ch] = T(1) / std::sqrt(stats.var[ch] + eps);
    std::vector<T> run_mean = stats.mean;
    for (int64_t b = 0; b < batch; ++b)
      for (int64_t ch = 0; ch < c; ++ch) {
        const T *xr = xv.data() + (b * c + ch) * t_in;
        T *yr = out.data() + (b * c + ch) * t_in;
        const T a = gv[ch] * inv_std[ch];
        const T o = bv[ch] - a * run_mean[ch];
        for (int64_t t = 0; t < t_in; ++t) yr[t] = a * xr[t] + o;
      }
    auto bw = [v, c, t_in, inv_std = std::move(inv_std),
               run_mean = std::move(run_mean)](TensorImpl<T> &self) {
      auto &px = self.parents[0];
      auto &pg = self.parents[1];
      auto &pbt = self.parents[2];
      for (int64_t b = 0; b < v.batch; ++b)
        for (int64_t ch = 0; ch < c; ++ch) {
          const T *gr = self.grad.data() + (b * c + ch) * t_in;
          const T *xr = px->values.data() + (b * c + ch) * t_in;
          const T a = pg->values[ch] * inv_std[ch];
          T dg = 0, db = 0;
          for (int64_t t = 0; t < t_in; ++t) {
            dg += gr[t] * (xr[t] - run_mean[ch]) * inv_std[ch];
            db += gr[t];
          }
          if (pg->requires_grad) pg->grad[ch] += dg;
          if (pbt->requires_grad) pbt->grad[ch] += db;
          if (px->requires_grad) {
            T *xg = px->grad.data() + (b * c + ch) * t_in;
            for (int64_t t = 0; t < t_in; ++t) xg[t] += a * gr[t];
          }
        }
    };
    return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                               {input.impl(), gamma.impl(), beta.impl()},
                               std::move(bw));
  }

  // Train mode: batch statistics per channel over (batch x time).
  std::vector<T> mean(c), inv_std(c), var(c);
  for (int64_t ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (int64_t b = 0; b < batch; ++b) {
      const T *xr = xv.data() + (b * c + ch) * t_in;
      for (int64_t t = 0; t < t_in; ++t) acc += xr[t];
    }
    double m = acc / static_cast<double>(n);
    double vacc = 0;
    for (int64_t b = 0; b < batch; ++b) {
      const T *xr = xv.data() + (b * c + ch) * t_in;
      for (int64_t t = 0; t < t_in; ++t) {
        double d = xr[t] - m;
        vacc += d * d;
      }
    }
    double biased = vacc / static_cast<double>(n);
    mean[ch] = static_cast<T>(m);
    var[ch] = static_cast<T>(biased);
    inv_std[ch] = static_cast<T>(1.0 / std::sqrt(biased + static_cast<double>(eps)));
  }
  std::vector<T> xhat(xv.size());
  for (int64_t b = 0; b < batch; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const T *xr = xv.data() + (b * c + ch) * t_in;
      T *hr = xhat.data() + (b * c + ch) * t_in;
      T *yr = out.data() + (b * c + ch) * t_in;
      for (int64_t t = 0; t < t_in; ++t) {
        hr[t] = (xr[t] - mean[ch]) * inv_std[ch];
        yr[t] = gv[ch] * hr[t] + bv[ch];
      }
    }

  if (static_cast<int64_t>(stats.mean.size()) != c) {
    stats.mean.assign(c, T(0));
    stats.var.assign(c, T(1));
  }
  for (int64_t ch = 0; ch < c; ++ch) {
    T var_update = n > 1 ? var[ch] * static_cast<T>(n) / static_cast<T>(n - 1)
                         : var[ch];
    stats.mean[ch] = (T(1) - momentum) * stats.mean[ch] + momentum * mean[ch];
    stats.var[ch] = (T(1) - momentum) * stats.var[ch] + momentum * var_update;
  }
  stats.initialized = true;

  auto bw = [v, c, t_in, n, inv_std = std::move(inv_std),
             xhat = std::move(xhat)](TensorImpl<T> &self) {
    auto &px = self.parents[0];
    auto &pg = self.parents[1];
    auto &pbt = self.parents[2];
    for (int64_t ch = 0; ch < c; ++ch) {
      double sum_g = 0, sum_gx = 0;
      for (int64_t b = 0; b < v.batch; ++b) {
        const T *gr = self.grad.data() + (b * c + ch) * t_in;
        const T *hr = xhat.data() + (b * c + ch) * t_in;
        for (int64_t t = 0; t < t_in; ++t) {
          sum_g += gr[t];
          sum_gx += gr[t] * hr[t];
        }
      }
      if (pg->requires_grad) pg->grad[ch] += static_cast<T>(sum_gx);
      if (pbt->requires_grad) pbt->grad[ch] += static_cast<T>(sum_g);
      if (px->requires_grad) {
        const T a = pg->values[ch] * inv_std[ch];
        const T mg = static_cast<T>(sum_g / n);
        const T mgx = static_cast<T>(sum_gx / n);
        for (int64_t b = 0; b < v.batch; ++b) {
          const T *gr = self.grad.data() + (b * c + ch) * t_in;
          const T *hr = xhat.data() + (b * c + ch) * t_in;
          T *xg = px->grad.data() + (b * c + ch) * t_in;
          for (int64_t t = 0; t < t_in; ++t)
            xg[t] += a * (gr[t] - mg - hr[t] * mgx);
        }
      }
    }
  };
  return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                             {input.impl(), gamma.impl(), beta.impl()},
                             std::move(bw));
}

// ---------------------------------------------------------------------------
// Pooling reductions.

// (C,T) -> (C) or (B,C,T) -> (B,C); backward spreads grad/T over frames.
template <typename T>
Tensor<T> TemporalMeanPool(const Tensor<T> &input) {
  auto v = detail::ViewTemporal(input, "TemporalMeanPool");
  if (v.time < 1) throw ShapeError("TemporalMeanPool: T must be >= 1");
  auto xv = input.Values();
  std::vector<T> out(static_cast<size_t>(v.batch) * v.chan);
  for (int64_t bc = 0; bc < v.batch * v.chan; ++bc) {
    double acc = 0;
    const T *xr = xv.data() + bc * v.time;
    for (int64_t t = 0; t < v.time; ++t) acc += xr[t];
    out[bc] = static_cast<T>(acc / static_cast<double>(v.time));
  }
  std::vector<int64_t> out_shape = v.batched
                                       ? std::vector<int64_t>{v.batch, v.chan}
                                       : std::vector<int64_t>{v.chan};
  auto bw = [v](TensorImpl<T> &self) {
    auto &p = self.parents[0];
    if (!p->requires_grad) return;
    const T inv = T(1) / static_cast<T>(v.time);
    for (int64_t bc = 0; bc < v.batch * v.chan; ++bc) {
      const T g = self.grad[bc] * inv;
      T *xg = p->grad.data() + bc * v.time;
      for (int64_t t = 0; t < v.time; ++t) xg[t] += g;
    }
  };
  return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                             {input.impl()}, std::move(bw));
}

// (C,H,W) -> (C) or (B,C,H,W) -> (B,C).
template <typename T>
Tensor<T> SpatialMeanPool(const Tensor<T> &input) {
  auto v = detail::ViewSpatial(input, "SpatialMeanPool");
  const int64_t area = v.height * v.width;
  if (area < 1) throw ShapeError("SpatialMeanPool: empty spatial extent");
  auto xv = input.Values();
  std::vector<T> out(static_cast<size_t>(v.batch) * v.chan);
  for (int64_t bc = 0; bc < v.batch * v.chan; ++bc) {
    double acc = 0;
    const T *xr = xv.data() + bc * area;
    for (int64_t i = 0; i < area; ++i) acc += xr[i];
    out[bc] = static_cast<T>(acc / static_cast<double>(area));
  }
  std::vector<int64_t> out_shape = v.batched
                                       ? std::vector<int64_t>{v.batch, v.chan}
                                       : std::vector<int64_t>{v.chan};
  auto bw = [v, area](TensorImpl<T> &self) {
    auto &p = self.parents[0];
    if (!p->requires_grad) return;
    const T inv = T(1) / static_cast<T>(area);
    for (int64_t bc = 0; bc < v.batch * v.chan; ++bc) {
      const T g = self.grad[bc] * inv;
      T *xg = p->grad.data() + bc * area;
      for (int64_t i = 0; i < area; ++i) xg[i] += g;
    }
  };
  return detail::MakeNode<T>(std::move(out_shape), std::move(out),
                             {input.impl()}, std::move(bw));
}

// ---------------------------------------------------------------------------
// Mean softmax cross-entropy over rows of (N, P) logits.

template <typename T>
Tensor<T> SoftmaxCrossEntropy(const Tensor<T> &logits,
                              const std::vector<int32_t> &labels) {
  if (logits.Rank() != 2)
    throw ShapeError(Cat("SoftmaxCrossEntropy: logits must be (N,P), got ",
                         ShapeStr(logits.Shape())));
  const int64_t n = logits.Dim(0), p = logits.Dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError(Cat("SoftmaxCrossEntropy: ", labels.size(),
                         " labels for ", n, " rows"));
  auto xv = logits.Values();
  std::vector<T> probs(xv.size());
  double loss = 0;
  for (int64_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || labels[r] >= p)
      throw DataError(Cat("SoftmaxCrossEntropy: label ", labels[r],
                          " out of range [0,", p, ")"));
    const T *xr = xv.data() + r * p;
    T *pr = probs.data() + r * p;
    T mx = xr[0];
    for (int64_t j = 1; j < p; ++j) mx = std::max(mx, xr[j]);
    double z = 0;
    for (int64_t j = 0; j < p; ++j) z += std::exp(static_cast<double>(xr[j] - mx));
    double logz = std::log(z) + static_cast<double>(mx);
    for (int64_t j = 0; j < p; ++j)
      pr[j] = static_cast<T>(std::exp(static_cast<double>(xr[j]) - logz));
    loss += logz - static_cast<double>(xr[labels[r]]);
  }
  loss /= static_cast<double>(n);
  auto bw = [n, p, labels, probs = std::move(probs)](TensorImpl<T> &self) {
    auto &px = self.parents[0];
    if (!px->requires_grad) return;
    const T g = self.grad[0] / static_cast<T>(n);
    for (int64_t r = 0; r < n; ++r) {
      const T *pr = probs.data() + r * p;
      T *xg = px->grad.data() + r * p;
      for (int64_t j = 0; j < p; ++j) xg[j] += g * pr[j];
      xg[labels[r]] -= g;
    }
  };
  return detail::MakeNode<T>({1}, {static_cast<T>(loss)}, {logits.impl()},
                             std::move(bw));
}

}  // namespace gdistill

#endif  // GDISTILL_OPS_H_
