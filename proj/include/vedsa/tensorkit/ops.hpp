#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vedsa/rng.hpp"
#include "vedsa/tensorkit/tape.hpp"

namespace vedsa::tk {

enum class Activation { Identity, Relu, Softplus, Exp, Sigmoid, Tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::Exp: return "exp";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  for (Activation a : {Activation::Identity, Activation::Relu, Activation::Softplus, Activation::Exp,
                       Activation::Sigmoid, Activation::Tanh})
    if (s == to_string(a)) return a;
  throw ConfigError("unknown activation '" + s + "'");
}

// ln(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double apply(Activation a, double x) {
  switch (a) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Softplus: return softplus(x);
    case Activation::Exp: return std::exp(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

// Derivative expressed through input x and output y.
inline double derivative(Activation a, double x, double y) {
  switch (a) {
    case Activation::Identity: return 1.0;
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Softplus: return sigmoid(x);
    case Activation::Exp: return y;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Tanh: return 1.0 - y * y;
  }
  return 1.0;
}

namespace detail {
inline void require_same_size(const Tape& t, Var a, Var b, const char* op) {
  if (t.value(a).size() != t.value(b).size())
    throw StructuralError(std::string(op) + ": operand sizes differ (" + shape_string(t.shape(a)) + " vs " +
                          shape_string(t.shape(b)) + ")");
}
}  // namespace detail

inline Var activate(Tape& t, Var x, Activation a) {
  if (a == Activation::Identity) return x;
  auto in = t.value(x);
  std::vector<double> out(in.size());
  for (std::size_t k = 0; k < in.size(); ++k) out[k] = apply(a, in[k]);
  if (a == Activation::Relu)
    for (std::size_t k = 0; k < in.size(); ++k) t.note_branch(in[k] > 0.0 ? 2 * k + 1 : 2 * k);
  const std::size_t xi = x.id;
  return t.record(t.shape(x), std::move(out), [xi, a](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto xv = tp.value_of(xi);
    auto yv = tp.value_of(self);
    auto gx = tp.grad_of(xi);
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * derivative(a, xv[k], yv[k]);
  });
}

/// W{m,n} * x{n} -> {m}
inline Var matvec(Tape& t, Var w, Var x) {
  const Shape& ws = t.shape(w);
  if (ws.size() != 2 || ws[1] != t.value(x).size())
    throw StructuralError("matvec: " + shape_string(ws) + " times vector of " +
                          std::to_string(t.value(x).size()));
  const std::size_t m = ws[0], n = ws[1];
  auto wv = t.value(w);
  auto xv = t.value(x);
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = wv.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
    out[i] = acc;
  }
  const std::size_t wi = w.id, xi = x.id;
  return t.record({m}, std::move(out), [wi, xi, m, n](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto wv = tp.value_of(wi);
    auto xv = tp.value_of(xi);
    auto gw = tp.grad_of(wi);
    auto gx = tp.grad_of(xi);
    for (std::size_t i = 0; i < m; ++i) {
      const double gi = g[i];
      if (gi == 0.0) continue;
      double* grow = gw.data() + i * n;
      const double* row = wv.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        grow[j] += gi * xv[j];
        gx[j] += gi * row[j];
      }
    }
  });
}

inline Var add(Tape& t, Var a, Var b) {
  detail::require_same_size(t, a, b, "add");
  auto av = t.value(a);
  auto bv = t.value(b);
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = av[k] + bv[k];
  const std::size_t ai = a.id, bi = b.id;
  return t.record(t.shape(a), std::move(out), [ai, bi](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ai);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    auto gb = tp.grad_of(bi);
    for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  detail::require_same_size(t, a, b, "sub");
  auto av = t.value(a);
  auto bv = t.value(b);
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = av[k] - bv[k];
  const std::size_t ai = a.id, bi = b.id;
  return t.record(t.shape(a), std::move(out), [ai, bi](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ai);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
    auto gb = tp.grad_of(bi);
    for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
  });
}

/// Elementwise product.
inline Var mul(Tape& t, Var a, Var b) {
  detail::require_same_size(t, a, b, "mul");
  auto av = t.value(a);
  auto bv = t.value(b);
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = av[k] * bv[k];
  const std::size_t ai = a.id, bi = b.id;
  return t.record(t.shape(a), std::move(out), [ai, bi](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto av = tp.value_of(ai);
    auto bv = tp.value_of(bi);
    auto ga = tp.grad_of(ai);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * bv[k];
    auto gb = tp.grad_of(bi);
    for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * av[k];
  });
}

inline Var scale(Tape& t, Var a, double c) {
  auto av = t.value(a);
  std::vector<double> out(av.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = c * av[k];
  const std::size_t ai = a.id;
  return t.record(t.shape(a), std::move(out), [ai, c](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ai);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += c * g[k];
  });
}

inline Var sum(Tape& t, Var a) {
  auto av = t.value(a);
  double acc = 0.0;
  for (double x : av) acc += x;
  const std::size_t ai = a.id;
  return t.record({1}, {acc}, [ai](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    for (double& x : tp.grad_of(ai)) x += g;
  });
}

/// Sum of several scalars, in argument order.
inline Var add_n(Tape& t, const std::vector<Var>& xs) {
  if (xs.empty()) throw StructuralError("add_n of nothing");
  double acc = 0.0;
  std::vector<std::size_t> ids;
  ids.reserve(xs.size());
  for (Var x : xs) {
    acc += t.scalar(x);
    ids.push_back(x.id);
  }
  return t.record({1}, {acc}, [ids = std::move(ids)](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    for (std::size_t id : ids) tp.grad_of(id)[0] += g;
  });
}

inline Var slice(Tape& t, Var a, std::size_t offset, std::size_t len) {
  auto av = t.value(a);
  if (offset + len > av.size()) throw StructuralError("slice out of range");
  std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(offset),
                          av.begin() + static_cast<std::ptrdiff_t>(offset + len));
  const std::size_t ai = a.id;
  return t.record({len}, std::move(out), [ai, offset](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ai);
    for (std::size_t k = 0; k < g.size(); ++k) ga[offset + k] += g[k];
  });
}

/// Flat concatenation; the result has shape {sum of sizes}.
inline Var concat(Tape& t, const std::vector<Var>& xs) {
  std::vector<double> out;
  std::vector<std::pair<std::size_t, std::size_t>> parts;  // id, offset
  for (Var x : xs) {
    auto v = t.value(x);
    parts.emplace_back(x.id, out.size());
    out.insert(out.end(), v.begin(), v.end());
  }
  const std::size_t total = out.size();
  return t.record({total}, std::move(out), [parts = std::move(parts)](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    for (auto [id, off] : parts) {
      auto gx = tp.grad_of(id);
      for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += g[off + k];
    }
  });
}

inline Var reshape(Tape& t, Var a, Shape shape) {
  auto av = t.value(a);
  if (shape_size(shape) != av.size()) throw StructuralError("reshape changes element count");
  std::vector<double> out(av.begin(), av.end());
  const std::size_t ai = a.id;
  return t.record(std::move(shape), std::move(out), [ai](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto ga = tp.grad_of(ai);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
  });
}

/// Valid (unpadded) 1-D convolution, cross-correlation convention.
/// x{Cin, L}, kernels{Cout, Cin, K}, bias{Cout} -> {Cout, (L-K)/stride + 1}
inline Var conv1d(Tape& t, Var x, Var kernels, Var bias, std::size_t stride = 1) {
  const Shape& xs = t.shape(x);
  const Shape& ks = t.shape(kernels);
  if (xs.size() != 2 || ks.size() != 3 || ks[1] != xs[0])
    throw StructuralError("conv1d: input " + shape_string(xs) + " incompatible with kernels " + shape_string(ks));
  if (t.value(bias).size() != ks[0]) throw StructuralError("conv1d: bias width mismatch");
  if (stride == 0) throw StructuralError("conv1d: stride must be positive");
  const std::size_t cin = xs[0], len = xs[1], cout = ks[0], kw = ks[2];
  if (kw > len)
    throw StructuralError("conv1d: kernel of " + std::to_string(kw) + " longer than input of " + std::to_string(len));
  const std::size_t lout = (len - kw) / stride + 1;
  auto xv = t.value(x);
  auto kv = t.value(kernels);
  auto bv = t.value(bias);
  std::vector<double> out(cout * lout);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t p = 0; p < lout; ++p) {
      double acc = bv[o];
      for (std::size_t c = 0; c < cin; ++c) {
        const double* krow = kv.data() + (o * cin + c) * kw;
        const double* xrow = xv.data() + c * len + p * stride;
        for (std::size_t q = 0; q < kw; ++q) acc += krow[q] * xrow[q];
      }
      out[o * lout + p] = acc;
    }
  const std::size_t xi = x.id, ki = kernels.id, bi = bias.id;
  return t.record({cout, lout}, std::move(out),
                  [=](Tape& tp, std::size_t self) {
                    auto g = tp.grad_of(self);
                    auto xv = tp.value_of(xi);
                    auto kv = tp.value_of(ki);
                    auto gx = tp.grad_of(xi);
                    auto gk = tp.grad_of(ki);
                    auto gb = tp.grad_of(bi);
                    for (std::size_t o = 0; o < cout; ++o)
                      for (std::size_t p = 0; p < lout; ++p) {
                        const double go = g[o * lout + p];
                        if (go == 0.0) continue;
                        gb[o] += go;
                        for (std::size_t c = 0; c < cin; ++c) {
                          const std::size_t kbase = (o * cin + c) * kw;
                          const std::size_t xbase = c * len + p * stride;
                          for (std::size_t q = 0; q < kw; ++q) {
                            gk[kbase + q] += go * xv[xbase + q];
                            gx[xbase + q] += go * kv[kbase + q];
                          }
                        }
                      }
                  });
}

/// Non-overlapping max pooling along the last axis of x{C, L}; a trailing
/// partial window is dropped. Ties go to the lowest index.
inline Var maxpool1d(Tape& t, Var x, std::size_t window) {
  const Shape& xs = t.shape(x);
  if (xs.size() != 2) throw StructuralError("maxpool1d expects {channels, length}");
  if (window == 0 || window > xs[1]) throw StructuralError("maxpool1d: window does not fit input");
  const std::size_t ch = xs[0], len = xs[1], lout = len / window;
  auto xv = t.value(x);
  std::vector<double> out(ch * lout);
  std::vector<std::size_t> argmax(ch * lout);
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t p = 0; p < lout; ++p) {
      std::size_t best = c * len + p * window;
      for (std::size_t q = 1; q < window; ++q) {
        const std::size_t k = c * len + p * window + q;
        if (xv[k] > xv[best]) best = k;
      }
      out[c * lout + p] = xv[best];
      argmax[c * lout + p] = best;
      t.note_branch(best);
    }
  const std::size_t xi = x.id;
  return t.record({ch, lout}, std::move(out), [xi, argmax = std::move(argmax)](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto gx = tp.grad_of(xi);
    for (std::size_t k = 0; k < g.size(); ++k) gx[argmax[k]] += g[k];
  });
}

/// Inverted dropout: identity when `train` is false or rate is 0, otherwise
/// zeroes each element with probability `rate` and scales survivors by 1/(1-rate).
inline Var dropout(Tape& t, Var x, double rate, Rng& rng, bool train) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return x;
  auto xv = t.value(x);
  std::vector<double> mask(xv.size());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep;
  std::vector<double> out(xv.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = xv[k] * mask[k];
  const std::size_t xi = x.id;
  return t.record(t.shape(x), std::move(out), [xi, mask = std::move(mask)](Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto gx = tp.grad_of(xi);
    for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * mask[k];
  });
}

/// Weighted binary cross-entropy of sigmoid(logit) against target y in {0,1},
/// computed from the logit for stability.
inline Var bce_with_logit(Tape& t, Var logit, double y, double weight = 1.0) {
  const double z = t.scalar(logit);
  // -[y ln p + (1-y) ln(1-p)] = softplus(z) - y z
  const double loss = weight * (softplus(z) - y * z);
  const std::size_t zi = logit.id;
  return t.record({1}, {loss}, [zi, y, weight](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    const double z = tp.value_of(zi)[0];
    tp.grad_of(zi)[0] += g * weight * (sigmoid(z) - y);
  });
}

}  // namespace vedsa::tk
