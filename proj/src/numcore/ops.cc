// Copyright 2026 The FPETS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fpets/numcore/ops.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fpets/numcore/errors.h"
#include "fpets/numcore/parallel.h"
#include "fpets/numcore/tape.h"

namespace fpets::ops {

using detail::grad_of;
using detail::TensorData;

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

// Vectors and [n x 1] matrices are both accepted where a sequence of scalars
// is expected.
void require_vector(const Tensor& t, const char* op) {
  if (t.rank() == 1) return;
  if (t.rank() == 2 && t.dim(1) == 1) return;
  throw DimensionError(std::string(op) + ": expected a vector, got shape " +
                       shape_to_string(t.shape()));
}

void finish(const Tensor& out, const char* op) {
#ifndef NDEBUG
  for (Real v : out.values()) {
    if (!std::isfinite(v)) {
      throw DomainError(std::string(op) + ": produced a non-finite value");
    }
  }
#else
  (void)out;
  (void)op;
#endif
}

Real stable_sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

Real stable_softplus(Real x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Elementwise op with derivative df(x, y).
template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* name, F f, DF df) {
  Tensor out(x.shape());
  const Real* xv = x.data();
  Real* yv = out.data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) yv[i] = f(xv[i]);
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record(name, {&x}, out, [xd, od, df] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        gx[i] += od->grad[i] * df(xd->value[i], od->value[i]);
      }
    });
  }
  finish(out, name);
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " +
                         shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  Tensor out(Shape{n, m});
  const Real* av = a.data();
  const Real* bv = b.data();
  Real* yv = out.data();
  parallel_for(n, k * m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Real* yrow = yv + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const Real aik = av[i * k + p];
        const Real* brow = bv + p * m;
        for (std::size_t j = 0; j < m; ++j) yrow[j] += aik * brow[j];
      }
    }
  });
  if (Tape* tape = detail::recording_tape({&a, &b})) {
    TensorData* ad = a.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("matmul", {&a, &b}, out, [ad, bd, od, n, k, m] {
      const auto& gy = od->grad;
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            Real acc = 0;
            for (std::size_t j = 0; j < m; ++j) {
              acc += gy[i * m + j] * bd->value[p * m + j];
            }
            ga[i * k + p] += acc;
          }
        }
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const Real aik = ad->value[i * k + p];
            for (std::size_t j = 0; j < m; ++j) {
              gb[p * m + j] += aik * gy[i * m + j];
            }
          }
        }
      }
    });
  }
  finish(out, "matmul");
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
  if (b.dim(1) != k) {
    throw DimensionError("matmul_nt: inner dimensions differ, " +
                         shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()) + "^T");
  }
  Tensor out(Shape{n, m});
  const Real* av = a.data();
  const Real* bv = b.data();
  Real* yv = out.data();
  parallel_for(n, k * m, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        Real acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[j * k + p];
        yv[i * m + j] = acc;
      }
    }
  });
  if (Tape* tape = detail::recording_tape({&a, &b})) {
    TensorData* ad = a.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("matmul_nt", {&a, &b}, out, [ad, bd, od, n, k, m] {
      const auto& gy = od->grad;
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            const Real g = gy[i * m + j];
            for (std::size_t p = 0; p < k; ++p) {
              ga[i * k + p] += g * bd->value[j * k + p];
            }
          }
        }
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            const Real g = gy[i * m + j];
            for (std::size_t p = 0; p < k; ++p) {
              gb[j * k + p] += g * ad->value[i * k + p];
            }
          }
        }
      }
    });
  }
  finish(out, "matmul_nt");
  return out;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "dense");
  require_rank(w, 2, "dense");
  const std::size_t n = x.dim(0), din = x.dim(1), dout = w.dim(1);
  if (w.dim(0) != din) {
    throw DimensionError("dense: input " + shape_to_string(x.shape()) +
                         " does not match weights " +
                         shape_to_string(w.shape()));
  }
  if (b.numel() != dout) {
    throw DimensionError("dense: bias " + shape_to_string(b.shape()) +
                         " does not match weights " +
                         shape_to_string(w.shape()));
  }
  Tensor out(Shape{n, dout});
  const Real* xv = x.data();
  const Real* wv = w.data();
  const Real* bv = b.data();
  Real* yv = out.data();
  parallel_for(n, din * dout, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Real* yrow = yv + i * dout;
      for (std::size_t p = 0; p < din; ++p) {
        const Real xik = xv[i * din + p];
        const Real* wrow = wv + p * dout;
        for (std::size_t j = 0; j < dout; ++j) yrow[j] += xik * wrow[j];
      }
      for (std::size_t j = 0; j < dout; ++j) yrow[j] += bv[j];
    }
  });
  if (Tape* tape = detail::recording_tape({&x, &w, &b})) {
    TensorData* xd = x.impl();
    TensorData* wd = w.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("dense", {&x, &w, &b}, out, [xd, wd, bd, od, n, din, dout] {
      const auto& gy = od->grad;
      if (xd->requires_grad) {
        auto& gx = grad_of(*xd);
        parallel_for(n, din * dout, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t p = 0; p < din; ++p) {
              Real acc = 0;
              const Real* wrow = wd->value.data() + p * dout;
              const Real* grow = gy.data() + i * dout;
              for (std::size_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
              gx[i * din + p] += acc;
            }
          }
        });
      }
      if (wd->requires_grad) {
        auto& gw = grad_of(*wd);
        parallel_for(din, n * dout, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t i = 0; i < n; ++i) {
            const Real* grow = gy.data() + i * dout;
            for (std::size_t p = lo; p < hi; ++p) {
              const Real xik = xd->value[i * din + p];
              Real* gwrow = gw.data() + p * dout;
              for (std::size_t j = 0; j < dout; ++j) gwrow[j] += xik * grow[j];
            }
          }
        });
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < dout; ++j) gb[j] += gy[i * dout + j];
        }
      }
    });
  }
  finish(out, "dense");
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& b) {
  require_rank(x, 2, "conv1d");
  require_rank(kernel, 3, "conv1d");
  const std::size_t t_len = x.dim(0), cin = x.dim(1);
  const std::size_t k = kernel.dim(0), cout = kernel.dim(2);
  if (k % 2 == 0) {
    throw ConfigError("conv1d: kernel size must be odd for same padding, got " +
                      std::to_string(k));
  }
  if (kernel.dim(1) != cin) {
    throw DimensionError("conv1d: input " + shape_to_string(x.shape()) +
                         " does not match kernel " +
                         shape_to_string(kernel.shape()));
  }
  if (b.numel() != cout) {
    throw DimensionError("conv1d: bias " + shape_to_string(b.shape()) +
                         " does not match kernel " +
                         shape_to_string(kernel.shape()));
  }
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto tl = static_cast<std::ptrdiff_t>(t_len);
  Tensor out(Shape{t_len, cout});
  const Real* xv = x.data();
  const Real* kv = kernel.data();
  const Real* bv = b.data();
  Real* yv = out.data();
  parallel_for(t_len, k * cin * cout, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t tau = lo; tau < hi; ++tau) {
      Real* yrow = yv + tau * cout;
      for (std::size_t tap = 0; tap < k; ++tap) {
        const std::ptrdiff_t src =
            static_cast<std::ptrdiff_t>(tau + tap) - pad;
        if (src < 0 || src >= tl) continue;
        const Real* xrow = xv + static_cast<std::size_t>(src) * cin;
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const Real xval = xrow[ci];
          const Real* krow = kv + (tap * cin + ci) * cout;
          for (std::size_t co = 0; co < cout; ++co) yrow[co] += xval * krow[co];
        }
      }
      for (std::size_t co = 0; co < cout; ++co) yrow[co] += bv[co];
    }
  });
  if (Tape* tape = detail::recording_tape({&x, &kernel, &b})) {
    TensorData* xd = x.impl();
    TensorData* kd = kernel.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("conv1d", {&x, &kernel, &b}, out,
                 [xd, kd, bd, od, t_len, cin, cout, k, pad, tl] {
      const auto& gy = od->grad;
      if (xd->requires_grad) {
        auto& gx = grad_of(*xd);
        // dx[u] = sum_tap gy[u - tap + pad] . K[tap]^T
        parallel_for(t_len, k * cin * cout, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t u = lo; u < hi; ++u) {
            for (std::size_t tap = 0; tap < k; ++tap) {
              const std::ptrdiff_t tau =
                  static_cast<std::ptrdiff_t>(u) - static_cast<std::ptrdiff_t>(tap) + pad;
              if (tau < 0 || tau >= tl) continue;
              const Real* grow = gy.data() + static_cast<std::size_t>(tau) * cout;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                const Real* krow = kd->value.data() + (tap * cin + ci) * cout;
                Real acc = 0;
                for (std::size_t co = 0; co < cout; ++co) acc += grow[co] * krow[co];
                gx[u * cin + ci] += acc;
              }
            }
          }
        });
      }
      if (kd->requires_grad) {
        auto& gk = grad_of(*kd);
        parallel_for(k * cin, t_len * cout, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t row = lo; row < hi; ++row) {
            const std::size_t tap = row / cin;
            const std::size_t ci = row % cin;
            Real* gkrow = gk.data() + row * cout;
            for (std::size_t tau = 0; tau < t_len; ++tau) {
              const std::ptrdiff_t src =
                  static_cast<std::ptrdiff_t>(tau + tap) - pad;
              if (src < 0 || src >= tl) continue;
              const Real xval = xd->value[static_cast<std::size_t>(src) * cin + ci];
              const Real* grow = gy.data() + tau * cout;
              for (std::size_t co = 0; co < cout; ++co) gkrow[co] += xval * grow[co];
            }
          }
        });
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t tau = 0; tau < t_len; ++tau) {
          for (std::size_t co = 0; co < cout; ++co) gb[co] += gy[tau * cout + co];
        }
      }
    });
  }
  finish(out, "conv1d");
  return out;
}

namespace {

template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da,
              DB db) {
  require_same_shape(a, b, name);
  Tensor out(a.shape());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(a[i], b[i]);
  if (Tape* tape = detail::recording_tape({&a, &b})) {
    TensorData* ad = a.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record(name, {&a, &b}, out, [ad, bd, od, da, db, n] {
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          ga[i] += od->grad[i] * da(ad->value[i], bd->value[i]);
        }
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t i = 0; i < n; ++i) {
          gb[i] += od->grad[i] * db(ad->value[i], bd->value[i]);
        }
      }
    });
  }
  finish(out, name);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](Real x, Real y) { return x + y; },
      [](Real, Real) { return Real(1); }, [](Real, Real) { return Real(1); });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](Real x, Real y) { return x - y; },
      [](Real, Real) { return Real(1); }, [](Real, Real) { return Real(-1); });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](Real x, Real y) { return x * y; },
      [](Real, Real y) { return y; }, [](Real x, Real) { return x; });
}

Tensor add_scalar(const Tensor& x, Real c) {
  return unary(
      x, "add_scalar", [c](Real v) { return v + c; },
      [](Real, Real) { return Real(1); });
}

Tensor scale(const Tensor& x, Real c) {
  return unary(
      x, "scale", [c](Real v) { return v * c; },
      [c](Real, Real) { return c; });
}

Tensor sin(const Tensor& x) {
  return unary(
      x, "sin", [](Real v) { return std::sin(v); },
      [](Real v, Real) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary(
      x, "cos", [](Real v) { return std::cos(v); },
      [](Real v, Real) { return -std::sin(v); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](Real v) { return std::exp(v); },
      [](Real, Real y) { return y; });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](Real v) { return std::tanh(v); },
      [](Real, Real y) { return Real(1) - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid", [](Real v) { return stable_sigmoid(v); },
      [](Real, Real y) { return y * (Real(1) - y); });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, "softplus", [](Real v) { return stable_softplus(v); },
      [](Real v, Real) { return stable_sigmoid(v); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](Real v) { return v * v; },
      [](Real v, Real) { return Real(2) * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](Real v) { return std::abs(v); },
      [](Real v, Real) {
        return v > 0 ? Real(1) : (v < 0 ? Real(-1) : Real(0));
      });
}

Tensor gated_activation(const Tensor& a, const Tensor& g) {
  require_same_shape(a, g, "gated_activation");
  const std::size_t n = a.numel();
  Tensor out(a.shape());
  std::vector<Real> th(n), sg(n);
  for (std::size_t i = 0; i < n; ++i) {
    th[i] = std::tanh(a[i]);
    sg[i] = stable_sigmoid(g[i]);
    out[i] = th[i] * sg[i];
  }
  if (Tape* tape = detail::recording_tape({&a, &g})) {
    TensorData* ad = a.impl();
    TensorData* gd = g.impl();
    TensorData* od = out.impl();
    tape->record("gated_activation", {&a, &g}, out,
                 [ad, gd, od, th = std::move(th), sg = std::move(sg), n] {
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          ga[i] += od->grad[i] * (Real(1) - th[i] * th[i]) * sg[i];
        }
      }
      if (gd->requires_grad) {
        auto& gg = grad_of(*gd);
        for (std::size_t i = 0; i < n; ++i) {
          gg[i] += od->grad[i] * th[i] * sg[i] * (Real(1) - sg[i]);
        }
      }
    });
  }
  finish(out, "gated_activation");
  return out;
}

Tensor sum(const Tensor& x) {
  Real acc = 0;
  for (Real v : x.values()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("sum", {&x}, out, [xd, od] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      const Real g = od->grad[0];
      for (Real& v : gx) v += g;
    });
  }
  finish(out, "sum");
  return out;
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), Real(1) / static_cast<Real>(x.numel()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) +
                         " as " + shape_to_string(shape));
  }
  Tensor out(std::move(shape),
             std::vector<Real>(x.values().begin(), x.values().end()));
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("reshape", {&x}, out, [xd, od] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += od->grad[i];
    });
  }
  return out;
}

Tensor cumsum_exclusive(const Tensor& x) {
  require_vector(x, "cumsum_exclusive");
  const std::size_t n = x.numel();
  Tensor out(x.shape());
  Real acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = acc;
    acc += x[i];
  }
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("cumsum_exclusive", {&x}, out, [xd, od, n] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      Real suffix = 0;  // sum of gy[i] for i > k
      for (std::size_t k = n; k-- > 0;) {
        gx[k] += suffix;
        suffix += od->grad[k];
      }
    });
  }
  return out;
}

Tensor outer_div(const Tensor& a, const Tensor& b) {
  require_vector(a, "outer_div");
  require_vector(b, "outer_div");
  const std::size_t n = a.numel(), m = b.numel();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = a[i] / b[j];
  }
  if (Tape* tape = detail::recording_tape({&a, &b})) {
    TensorData* ad = a.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("outer_div", {&a, &b}, out, [ad, bd, od, n, m] {
      const auto& gy = od->grad;
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            ga[i] += gy[i * m + j] / bd->value[j];
          }
        }
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t j = 0; j < m; ++j) {
          const Real bj = bd->value[j];
          for (std::size_t i = 0; i < n; ++i) {
            gb[j] -= gy[i * m + j] * ad->value[i] / (bj * bj);
          }
        }
      }
    });
  }
  finish(out, "outer_div");
  return out;
}

Tensor outer_sub(const Tensor& a, const Tensor& b) {
  require_vector(a, "outer_sub");
  require_vector(b, "outer_sub");
  const std::size_t n = a.numel(), m = b.numel();
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = a[i] - b[j];
  }
  if (Tape* tape = detail::recording_tape({&a, &b})) {
    TensorData* ad = a.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("outer_sub", {&a, &b}, out, [ad, bd, od, n, m] {
      const auto& gy = od->grad;
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) ga[i] += gy[i * m + j];
        }
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) gb[j] -= gy[i * m + j];
        }
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (begin >= end || end > c) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " +
                         shape_to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{n, w});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.data() + i * c + begin, w, out.data() + i * w);
  }
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("slice_cols", {&x}, out, [xd, od, n, c, w, begin] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          gx[i * c + begin + j] += od->grad[i * w + j];
        }
      }
    });
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols");
  require_rank(b, 2, "concat_cols");
  const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  if (b.dim(0) != n) {
    throw DimensionError("concat_cols: row counts differ, " +
                         shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  const std::size_t c = ca + cb;
  Tensor out(Shape{n, c});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * ca, ca, out.data() + i * c);
    std::copy_n(b.data() + i * cb, cb, out.data() + i * c + ca);
  }
  if (Tape* tape = detail::recording_tape({&a, &b})) {
    TensorData* ad = a.impl();
    TensorData* bd = b.impl();
    TensorData* od = out.impl();
    tape->record("concat_cols", {&a, &b}, out, [ad, bd, od, n, ca, cb, c] {
      if (ad->requires_grad) {
        auto& ga = grad_of(*ad);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += od->grad[i * c + j];
        }
      }
      if (bd->requires_grad) {
        auto& gb = grad_of(*bd);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < cb; ++j) {
            gb[i * cb + j] += od->grad[i * c + ca + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() < 1 || begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") outside " +
                         shape_to_string(x.shape()));
  }
  const std::size_t stride = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  Tensor out(shape);
  std::copy_n(x.data() + begin * stride, (end - begin) * stride, out.data());
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("slice_rows", {&x}, out, [xd, od, begin, stride] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t i = 0; i < od->grad.size(); ++i) {
        gx[begin * stride + i] += od->grad[i];
      }
    });
  }
  return out;
}

Tensor pad_rows(const Tensor& x, std::size_t rows) {
  if (rows < x.dim(0)) {
    throw DimensionError("pad_rows: cannot pad " + shape_to_string(x.shape()) +
                         " down to " + std::to_string(rows) + " rows");
  }
  const std::size_t stride = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = rows;
  Tensor out(shape);
  std::copy_n(x.data(), x.numel(), out.data());
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("pad_rows", {&x}, out, [xd, od] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += od->grad[i];
    });
  }
  (void)stride;
  return out;
}

Tensor avg_pool1d(const Tensor& x) {
  require_rank(x, 2, "avg_pool1d");
  const std::size_t t_len = x.dim(0), c = x.dim(1);
  const std::size_t out_len = (t_len + 1) / 2;
  Tensor out(Shape{out_len, c});
  for (std::size_t o = 0; o < out_len; ++o) {
    const std::size_t i0 = 2 * o;
    const std::size_t i1 = std::min(i0 + 1, t_len - 1);
    for (std::size_t j = 0; j < c; ++j) {
      out[o * c + j] = Real(0.5) * (x[i0 * c + j] + x[i1 * c + j]);
    }
  }
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("avg_pool1d", {&x}, out, [xd, od, t_len, c, out_len] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t o = 0; o < out_len; ++o) {
        const std::size_t i0 = 2 * o;
        const std::size_t i1 = std::min(i0 + 1, t_len - 1);
        for (std::size_t j = 0; j < c; ++j) {
          const Real g = Real(0.5) * od->grad[o * c + j];
          gx[i0 * c + j] += g;
          gx[i1 * c + j] += g;
        }
      }
    });
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, std::size_t target_len) {
  require_rank(x, 2, "upsample_nearest");
  const std::size_t t_len = x.dim(0), c = x.dim(1);
  if (target_len + 1 != 2 * t_len && target_len != 2 * t_len) {
    throw DimensionError("upsample_nearest: target length " +
                         std::to_string(target_len) + " not in {" +
                         std::to_string(2 * t_len - 1) + ", " +
                         std::to_string(2 * t_len) + "}");
  }
  Tensor out(Shape{target_len, c});
  for (std::size_t u = 0; u < target_len; ++u) {
    std::copy_n(x.data() + (u / 2) * c, c, out.data() + u * c);
  }
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("upsample_nearest", {&x}, out, [xd, od, target_len, c] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t u = 0; u < target_len; ++u) {
        for (std::size_t j = 0; j < c; ++j) {
          gx[(u / 2) * c + j] += od->grad[u * c + j];
        }
      }
    });
  }
  return out;
}

Tensor embedding(std::span<const int> ids, const Tensor& table) {
  require_rank(table, 2, "embedding");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw DimensionError("embedding: empty id sequence");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw IndexError("embedding: id " + std::to_string(ids[i]) +
                       " at position " + std::to_string(i) + " outside [0, " +
                       std::to_string(vocab) + ")");
    }
  }
  Tensor out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * d, d,
                out.data() + i * d);
  }
  if (Tape* tape = detail::recording_tape({&table})) {
    TensorData* td = table.impl();
    TensorData* od = out.impl();
    tape->record("embedding", {&table}, out,
                 [td, od, d, ids = std::vector<int>(ids.begin(), ids.end())] {
      if (!td->requires_grad) return;
      auto& gt = grad_of(*td);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t row = static_cast<std::size_t>(ids[i]);
        for (std::size_t j = 0; j < d; ++j) gt[row * d + j] += od->grad[i * d + j];
      }
    });
  }
  return out;
}

Tensor row_normalize(const Tensor& a, Real eps) {
  require_rank(a, 2, "row_normalize");
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<Real> sums(n);
  for (std::size_t j = 0; j < n; ++j) {
    Real s = 0;
    for (std::size_t i = 0; i < m; ++i) s += a[j * m + i];
    if (!(std::abs(s) > eps)) {
      throw DegenerateAttentionError(
          "row_normalize: row " + std::to_string(j) + " sums to " +
          std::to_string(s) + " (|sum| <= " + std::to_string(eps) + ")");
    }
    sums[j] = s;
  }
  Tensor out(a.shape());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) out[j * m + i] = a[j * m + i] / sums[j];
  }
  if (Tape* tape = detail::recording_tape({&a})) {
    TensorData* ad = a.impl();
    TensorData* od = out.impl();
    tape->record("row_normalize", {&a}, out,
                 [ad, od, n, m, sums = std::move(sums)] {
      if (!ad->requires_grad) return;
      auto& ga = grad_of(*ad);
      for (std::size_t j = 0; j < n; ++j) {
        Real dot = 0;
        for (std::size_t i = 0; i < m; ++i) {
          dot += od->grad[j * m + i] * ad->value[j * m + i];
        }
        const Real s = sums[j];
        for (std::size_t i = 0; i < m; ++i) {
          ga[j * m + i] += od->grad[j * m + i] / s - dot / (s * s);
        }
      }
    });
  }
  finish(out, "row_normalize");
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  require_rank(a, 2, "softmax_rows");
  const std::size_t n = a.dim(0), m = a.dim(1);
  Tensor out(a.shape());
  for (std::size_t j = 0; j < n; ++j) {
    Real mx = a[j * m];
    for (std::size_t i = 1; i < m; ++i) mx = std::max(mx, a[j * m + i]);
    Real s = 0;
    for (std::size_t i = 0; i < m; ++i) {
      out[j * m + i] = std::exp(a[j * m + i] - mx);
      s += out[j * m + i];
    }
    for (std::size_t i = 0; i < m; ++i) out[j * m + i] /= s;
  }
  if (Tape* tape = detail::recording_tape({&a})) {
    TensorData* ad = a.impl();
    TensorData* od = out.impl();
    tape->record("softmax_rows", {&a}, out, [ad, od, n, m] {
      if (!ad->requires_grad) return;
      auto& ga = grad_of(*ad);
      for (std::size_t j = 0; j < n; ++j) {
        Real dot = 0;
        for (std::size_t i = 0; i < m; ++i) {
          dot += od->grad[j * m + i] * od->value[j * m + i];
        }
        for (std::size_t i = 0; i < m; ++i) {
          ga[j * m + i] += od->value[j * m + i] * (od->grad[j * m + i] - dot);
        }
      }
    });
  }
  finish(out, "softmax_rows");
  return out;
}

Tensor dropout(const Tensor& x, Real p, bool training, std::uint64_t seed) {
  if (!(p >= 0) || !(p < 1)) {
    throw DomainError("dropout: probability must lie in [0, 1), got " +
                      std::to_string(p));
  }
  if (!training || p == 0) return x;
  std::mt19937_64 rng(seed);
  const std::size_t n = x.numel();
  const Real keep_scale = Real(1) / (Real(1) - p);
  std::vector<Real> mask(n);
  for (std::size_t i = 0; i < n; ++i) {
    // 53-bit uniform in [0, 1); avoids implementation-defined distributions.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u < static_cast<double>(p) ? Real(0) : keep_scale;
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * mask[i];
  if (Tape* tape = detail::recording_tape({&x})) {
    TensorData* xd = x.impl();
    TensorData* od = out.impl();
    tape->record("dropout", {&x}, out, [xd, od, mask = std::move(mask)] {
      if (!xd->requires_grad) return;
      auto& gx = grad_of(*xd);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += od->grad[i] * mask[i];
    });
  }
  return out;
}

}  // namespace fpets::ops
