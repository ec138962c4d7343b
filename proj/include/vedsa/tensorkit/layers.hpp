#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vedsa/rng.hpp"
#include "vedsa/tensorkit/ops.hpp"
#include "vedsa/tensorkit/tape.hpp"

namespace vedsa::tk {

inline void fill_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.values) v = rng.uniform(-bound, bound);
}

/// Fully connected layer: act(W x + b).
struct Dense {
  Tensor weight;  // {out, in}
  Tensor bias;    // {out}
  Activation activation = Activation::Identity;

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Activation act, Rng& rng)
      : weight({out, in}), bias({out}), activation(act) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    fill_uniform(weight, bound, rng);
    fill_uniform(bias, bound, rng);
  }

  std::size_t in() const { return weight.shape.at(1); }
  std::size_t out() const { return weight.shape.at(0); }

  Var forward(Tape& t, Var x) const {
    if (t.value(x).size() != in())
      throw StructuralError("dense: expected input of " + std::to_string(in()) + ", got " +
                            std::to_string(t.value(x).size()));
    Var z = add(t, matvec(t, t.param(weight), x), t.param(bias));
    return activate(t, z, activation);
  }

  void collect(NamedParams& out, const std::string& prefix) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
  }
};

struct LstmState {
  Var hidden;
  Var cell;
};

/// Single LSTM layer. Gate rows are stacked as [input, forget, candidate, output]:
///   z = Wx x + Wh h + b
///   c' = sigmoid(z_f) * c + sigmoid(z_i) * tanh(z_g)
///   h' = sigmoid(z_o) * tanh(c')
struct Lstm {
  Tensor w_input;      // {4H, I}
  Tensor w_recurrent;  // {4H, H}
  Tensor bias;         // {4H}

  Lstm() = default;
  Lstm(std::size_t input_size, std::size_t hidden, Rng& rng)
      : w_input({4 * hidden, input_size}), w_recurrent({4 * hidden, hidden}), bias({4 * hidden}) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    fill_uniform(w_input, bound, rng);
    fill_uniform(w_recurrent, bound, rng);
    fill_uniform(bias, bound, rng);
    for (std::size_t k = hidden; k < 2 * hidden; ++k) bias.values[k] = 1.0;
  }

  std::size_t hidden_size() const { return w_recurrent.shape.at(1); }
  std::size_t input_size() const { return w_input.shape.at(1); }

  LstmState initial_state(Tape& t) const {
    const std::size_t h = hidden_size();
    return {t.constant(std::vector<double>(h, 0.0)), t.constant(std::vector<double>(h, 0.0))};
  }

  /// One step; the layer output is the new hidden state.
  LstmState step(Tape& t, const LstmState& s, Var x) const {
    const std::size_t h = hidden_size();
    if (t.value(x).size() != input_size())
      throw StructuralError("lstm: expected input of " + std::to_string(input_size()) + ", got " +
                            std::to_string(t.value(x).size()));
    if (t.value(s.hidden).size() != h || t.value(s.cell).size() != h)
      throw StructuralError("lstm: state width does not match hidden size");
    Var z = add(t, add(t, matvec(t, t.param(w_input), x), matvec(t, t.param(w_recurrent), s.hidden)),
                t.param(bias));
    Var in_gate = activate(t, slice(t, z, 0, h), Activation::Sigmoid);
    Var forget = activate(t, slice(t, z, h, h), Activation::Sigmoid);
    Var cand = activate(t, slice(t, z, 2 * h, h), Activation::Tanh);
    Var out_gate = activate(t, slice(t, z, 3 * h, h), Activation::Sigmoid);
    Var cell = add(t, mul(t, forget, s.cell), mul(t, in_gate, cand));
    Var hidden = mul(t, out_gate, activate(t, cell, Activation::Tanh));
    return {hidden, cell};
  }

  void collect(NamedParams& out, const std::string& prefix) {
    out.emplace_back(prefix + ".w_input", &w_input);
    out.emplace_back(prefix + ".w_recurrent", &w_recurrent);
    out.emplace_back(prefix + ".bias", &bias);
  }
};

struct Conv1d {
  Tensor kernels;  // {Cout, Cin, K}
  Tensor bias;     // {Cout}
  std::size_t stride = 1;

  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t width, Rng& rng, std::size_t stride_ = 1)
      : kernels({out_channels, in_channels, width}), bias({out_channels}), stride(stride_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * width));
    fill_uniform(kernels, bound, rng);
    fill_uniform(bias, bound, rng);
  }

  Var forward(Tape& t, Var x) const { return conv1d(t, x, t.param(kernels), t.param(bias), stride); }

  void collect(NamedParams& out, const std::string& prefix) {
    out.emplace_back(prefix + ".kernels", &kernels);
    out.emplace_back(prefix + ".bias", &bias);
  }
};

inline void zero_grads(const NamedParams& params) {
  for (const auto& [name, t] : params) t->zero_grad();
}

inline double grad_norm(const NamedParams& params) {
  double acc = 0.0;
  for (const auto& [name, t] : params)
    for (double g : t->grad) acc += g * g;
  return std::sqrt(acc);
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
inline void clip_grad_norm(const NamedParams& params, double max_norm) {
  if (!(max_norm > 0.0)) return;
  const double norm = grad_norm(params);
  if (norm <= max_norm) return;
  const double c = max_norm / norm;
  for (const auto& [name, t] : params)
    for (double& g : t->grad) g *= c;
}

}  // namespace vedsa::tk
