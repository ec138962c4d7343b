#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vedsa/core.hpp"
#include "vedsa/rng.hpp"
#include "vedsa/survdist.hpp"
#include "vedsa/tensorkit.hpp"

namespace vedsa {

/// Floor applied inside every logarithm of the survival loss.
inline constexpr double kLogFloor = 1e-8;

struct GammaConfig {
  DistFamily family = DistFamily::Weibull;
  std::size_t hidden_size = 32;
  std::size_t lstm_layers = 1;
  tk::Activation activation = tk::Activation::Softplus;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  double bin_length = 1.0;    // hours per bin
  std::size_t horizon = 48;   // T_max, in bins
  double grad_clip = 5.0;     // global L2 norm; <= 0 disables

  void validate() const {
    if (hidden_size < 1) throw ConfigError("gamma: hidden_size must be >= 1");
    if (lstm_layers < 1) throw ConfigError("gamma: lstm_layers must be >= 1");
    if (activation != tk::Activation::Softplus && activation != tk::Activation::Exp)
      throw ConfigError("gamma: head activation must be softplus or exp");
    if (!(learning_rate > 0.0)) throw ConfigError("gamma: learning_rate must be positive");
    if (batch_size < 1) throw ConfigError("gamma: batch_size must be >= 1");
    if (!(bin_length > 0.0)) throw ConfigError("gamma: bin_length must be positive");
    if (horizon < 1) throw ConfigError("gamma: horizon must be >= 1");
  }
};

inline void to_json(nlohmann::json& j, const GammaConfig& c) {
  j = {{"family", to_string(c.family)},   {"hidden_size", c.hidden_size}, {"lstm_layers", c.lstm_layers},
       {"activation", tk::to_string(c.activation)}, {"learning_rate", c.learning_rate},
       {"batch_size", c.batch_size},      {"epochs", c.epochs},           {"seed", c.seed},
       {"bin_length", c.bin_length},      {"horizon", c.horizon},         {"grad_clip", c.grad_clip}};
}

inline void from_json(const nlohmann::json& j, GammaConfig& c) {
  GammaConfig d;
  c.family = family_from_string(j.value("family", std::string(to_string(d.family))));
  c.hidden_size = j.value("hidden_size", d.hidden_size);
  c.lstm_layers = j.value("lstm_layers", d.lstm_layers);
  c.activation = tk::activation_from_string(j.value("activation", std::string(tk::to_string(d.activation))));
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.bin_length = j.value("bin_length", d.bin_length);
  c.horizon = j.value("horizon", d.horizon);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
}

/// Discrete survival curve S(1..T_max) on the bin grid.
struct SurvivalCurve {
  std::vector<double> values;
  std::size_t horizon = 0;
  std::size_t observed_bins = 0;
  DistFamily family = DistFamily::Exponential;
  std::vector<DistParams> trace;  // parameters used for each bin
};

// ---------------------------------------------------------------------------
// Survival loss, value level.

/// Integrated hazard of each bin [j L, (j+1) L) under that bin's parameters.
inline std::vector<double> bin_hazard_values(DistFamily f, std::span<const DistParams> per_bin, double bin_length) {
  std::vector<double> h(per_bin.size());
  for (std::size_t j = 0; j < per_bin.size(); ++j)
    h[j] = hazard_increment(f, per_bin[j], static_cast<double>(j) * bin_length,
                            static_cast<double>(j + 1) * bin_length);
  return h;
}

/// Per-cascade censored negative log-likelihood from hazards:
///   sum_j ( -sigma_j ln h_j - ln S_j ),  S_j = exp(-sum_{k<=j} h_k)
inline double survival_nll(std::span<const double> hazards, std::span<const std::uint8_t> sigma) {
  if (hazards.size() != sigma.size()) throw StructuralError("hazard and sigma sequences differ in length");
  double loss = 0.0, cum = 0.0;
  for (std::size_t j = 0; j < hazards.size(); ++j) {
    if (!(hazards[j] >= 0.0)) throw DomainError("negative hazard");
    cum += hazards[j];
    loss += cum;
    if (sigma[j]) loss -= std::log(std::max(hazards[j], kLogFloor));
  }
  return loss;
}

inline double survival_nll(DistFamily f, std::span<const DistParams> per_bin, std::span<const std::uint8_t> sigma,
                           double bin_length) {
  auto h = bin_hazard_values(f, per_bin, bin_length);
  return survival_nll(h, sigma);
}

/// The same likelihood written through the density, f_j = h_j S_j:
///   sum_j ( (sigma_j - 1) ln S_j - sigma_j ln f_j )
inline double survival_nll_via_density(std::span<const double> hazards, std::span<const std::uint8_t> sigma) {
  if (hazards.size() != sigma.size()) throw StructuralError("hazard and sigma sequences differ in length");
  auto s = discrete_survival(hazards);
  double loss = 0.0;
  for (std::size_t j = 0; j < hazards.size(); ++j) {
    const double log_s = std::log(s[j]);
    const double log_f = std::log(std::max(hazards[j], kLogFloor)) + log_s;
    loss += (static_cast<double>(sigma[j]) - 1.0) * log_s - static_cast<double>(sigma[j]) * log_f;
  }
  return loss;
}

/// Curve from explicit per-bin parameters; `per_bin.size()` is the horizon.
inline SurvivalCurve survival_curve_from_params(DistFamily f, std::vector<DistParams> per_bin, double bin_length,
                                                std::size_t observed_bins) {
  auto h = bin_hazard_values(f, per_bin, bin_length);
  SurvivalCurve c;
  c.values = discrete_survival(h);
  for (double& v : c.values) v = std::max(v, std::numeric_limits<double>::min());
  c.horizon = per_bin.size();
  c.observed_bins = observed_bins;
  c.family = f;
  c.trace = std::move(per_bin);
  return c;
}

// ---------------------------------------------------------------------------
// Survival loss, tape primitives.

/// params{J, k} (rows in head order) -> per-bin integrated hazards {J}.
inline tk::Var bin_hazards(tk::Tape& t, tk::Var params, DistFamily f, double bin_length) {
  const auto& ps = t.shape(params);
  const std::size_t k = param_count(f);
  if (ps.size() != 2 || ps[1] != k) throw StructuralError("bin_hazards: parameter matrix has the wrong width");
  const std::size_t rows = ps[0];
  auto pv = t.value(params);
  std::vector<double> out(rows);
  for (std::size_t j = 0; j < rows; ++j) {
    const DistParams p = params_from_vector(f, pv.subspan(j * k, k));
    out[j] = hazard_increment(f, p, static_cast<double>(j) * bin_length, static_cast<double>(j + 1) * bin_length);
  }
  const std::size_t pi = params.id;
  return t.record({rows}, std::move(out), [pi, f, k, bin_length](tk::Tape& tp, std::size_t self) {
    auto g = tp.grad_of(self);
    auto pv = tp.value_of(pi);
    auto gp = tp.grad_of(pi);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double t0 = static_cast<double>(j) * bin_length;
      const double t1 = static_cast<double>(j + 1) * bin_length;
      switch (f) {
        case DistFamily::Exponential:
          gp[j] += g[j] * (t1 - t0);
          break;
        case DistFamily::Rayleigh:
          gp[j] += g[j] * 0.5 * (t1 * t1 - t0 * t0);
          break;
        case DistFamily::Weibull: {
          const double kappa = pv[j * k], scale = pv[j * k + 1];
          const double a1 = std::pow(t1 / scale, kappa);
          const double a0 = t0 > 0.0 ? std::pow(t0 / scale, kappa) : 0.0;
          const double l1 = std::log(t1 / scale);
          const double l0 = t0 > 0.0 ? std::log(t0 / scale) : 0.0;
          gp[j * k] += g[j] * (a1 * l1 - a0 * l0);
          gp[j * k + 1] += g[j] * (-(kappa / scale) * (a1 - a0));
          break;
        }
      }
    }
  });
}

/// Scalar survival loss of one cascade from its hazard vector.
inline tk::Var survival_nll(tk::Tape& t, tk::Var hazards, std::span<const std::uint8_t> sigma) {
  auto hv = t.value(hazards);
  const double loss = survival_nll(hv, sigma);
  std::vector<std::uint8_t> s(sigma.begin(), sigma.end());
  const std::size_t hi = hazards.id;
  return t.record({1}, {loss}, [hi, s = std::move(s)](tk::Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)[0];
    auto hv = tp.value_of(hi);
    auto gh = tp.grad_of(hi);
    const std::size_t n = hv.size();
    for (std::size_t k = 0; k < n; ++k) {
      double d = static_cast<double>(n - k);  // bin k appears in S_k .. S_{n-1}
      if (s[k] && hv[k] > kLogFloor) d -= 1.0 / hv[k];
      gh[k] += g * d;
    }
  });
}

// ---------------------------------------------------------------------------

/// Recurrent survival fitter: LSTM stack over binned counts, FC head emitting
/// one parameter set per bin.
///
/// The parameters for bin j are read from the state after bins 0..j-1, so a
/// bin's hazard never conditions on that bin's own count. Input features per
/// step are ln(1 + count) and ln(1 + cumulative count) of the previous bin
/// (zeros at the first step).
///
/// Head outputs are scaled by a fixed per-family unit tied to the horizon so
/// an untrained network starts near "one viral event per horizon".
class GammaModel {
 public:
  static constexpr std::size_t kInputFeatures = 2;

  explicit GammaModel(GammaConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(cfg_.seed, 0x67616d6d61ULL));
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l)
      lstm_.emplace_back(l == 0 ? kInputFeatures : cfg_.hidden_size, cfg_.hidden_size, rng);
    head_ = tk::Dense(cfg_.hidden_size, param_count(cfg_.family), cfg_.activation, rng);
    units_ = head_units(cfg_);
  }

  const GammaConfig& config() const { return cfg_; }

  tk::NamedParams parameters() {
    tk::NamedParams out;
    for (std::size_t l = 0; l < lstm_.size(); ++l) lstm_[l].collect(out, "lstm" + std::to_string(l));
    head_.collect(out, "head");
    return out;
  }

  /// Parameter rows for bins 0..steps-1 as a {steps, k} tape variable.
  /// Requires steps <= counts.size() + 1.
  tk::Var param_sequence(tk::Tape& t, std::span<const std::int64_t> counts, std::size_t steps) const {
    if (steps == 0) throw DomainError("gamma: no bins to parameterize");
    if (steps > counts.size() + 1) throw StructuralError("gamma: more steps requested than observed bins allow");
    std::vector<tk::LstmState> state;
    for (const auto& layer : lstm_) state.push_back(layer.initial_state(t));
    tk::Var units = t.constant(units_);
    std::vector<tk::Var> rows;
    rows.reserve(steps);
    double cum = 0.0;
    for (std::size_t j = 0; j < steps; ++j) {
      std::vector<double> x(kInputFeatures, 0.0);
      if (j > 0) {
        const double c = static_cast<double>(counts[j - 1]);
        if (c < 0.0) throw DomainError("gamma: negative bin count");
        cum += c;
        x[0] = std::log1p(c);
        x[1] = std::log1p(cum);
      }
      tk::Var in = t.constant(std::move(x));
      for (std::size_t l = 0; l < lstm_.size(); ++l) {
        state[l] = lstm_[l].step(t, state[l], in);
        in = state[l].hidden;
      }
      rows.push_back(tk::mul(t, head_.forward(t, in), units));
    }
    return tk::reshape(t, tk::concat(t, rows), {steps, param_count(cfg_.family)});
  }

  std::vector<DistParams> decode(const tk::Tape& t, tk::Var params) const {
    const std::size_t k = param_count(cfg_.family);
    auto v = t.value(params);
    std::vector<DistParams> out;
    for (std::size_t j = 0; j * k < v.size(); ++j) {
      DistParams p = params_from_vector(cfg_.family, v.subspan(j * k, k));
      validate(cfg_.family, p);
      out.push_back(p);
    }
    return out;
  }

  /// One parameter set per observed bin.
  std::vector<DistParams> forward_params(const BinnedCascade& b) const {
    if (b.counts.size() > cfg_.horizon) throw DomainError("gamma: input longer than the model horizon");
    tk::Tape t;
    return decode(t, param_sequence(t, b.counts, b.counts.size()));
  }

  /// Survival loss of one training cascade over the model horizon.
  tk::Var loss(tk::Tape& t, const LabeledCascade& c) const {
    const std::size_t horizon = cfg_.horizon;
    std::vector<std::int64_t> counts(horizon, 0);
    std::vector<std::uint8_t> sigma(horizon, 0);
    const std::size_t have = std::min(horizon, c.binned.counts.size());
    std::copy_n(c.binned.counts.begin(), have, counts.begin());
    if (c.sigma.size() < have) throw StructuralError("gamma: sigma shorter than the binned counts");
    std::copy_n(c.sigma.begin(), have, sigma.begin());
    // Bins past the recorded span: the viral state is absorbing.
    for (std::size_t j = have; j < horizon; ++j) sigma[j] = (c.viral_time && j >= *c.viral_time) ? 1 : 0;
    tk::Var p = param_sequence(t, counts, horizon);
    return survival_nll(t, bin_hazards(t, p, cfg_.family, cfg_.bin_length), sigma);
  }

  nlohmann::json checkpoint() {
    return tk::make_checkpoint("gamma", cfg_, parameters());
  }

  static GammaModel from_checkpoint(const nlohmann::json& j) {
    tk::check_checkpoint(j, "gamma");
    GammaModel m(j.at("config").get<GammaConfig>());
    tk::params_from_json(j.at("params"), m.parameters());
    return m;
  }

 private:
  static std::vector<double> head_units(const GammaConfig& c) {
    const double span = static_cast<double>(c.horizon) * c.bin_length;
    switch (c.family) {
      case DistFamily::Exponential: return {1.0 / span};
      case DistFamily::Rayleigh: return {1.0 / (span * span)};
      case DistFamily::Weibull: return {1.0, span};
    }
    return {};
  }

  GammaConfig cfg_;
  std::vector<tk::Lstm> lstm_;
  tk::Dense head_;
  std::vector<double> units_;
};

struct GammaTrainResult {
  GammaModel model;
  std::vector<double> loss_trace;  // mean per-cascade loss of each epoch
};

/// Minibatch Adam epochs on `model`, without any check on class balance.
/// Returns the mean per-cascade loss of each epoch.
inline std::vector<double> fit_gamma(GammaModel& model, const std::vector<LabeledCascade>& data,
                                     const GammaConfig& cfg) {
  if (data.empty()) throw DomainError("gamma: empty training set");
  std::vector<double> trace;
  tk::NamedParams params = model.parameters();
  tk::Adam opt(params, {.learning_rate = cfg.learning_rate});
  Rng rng(derive_seed(cfg.seed, 0x7472616eULL));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      tk::zero_grads(params);
      for (std::size_t b = start; b < end; ++b) {
        tk::Tape t;
        tk::Var l = model.loss(t, data[order[b]]);
        total += t.scalar(l);
        tk::Var scaled = tk::scale(t, l, inv);
        t.backward(scaled);
        t.accumulate_into(params);
      }
      tk::clip_grad_norm(params, cfg.grad_clip);
      opt.step();
    }
    const double mean = total / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw NumericError("gamma: training loss diverged at epoch " + std::to_string(epoch));
    trace.push_back(mean);
  }
  return trace;
}

/// Minibatch Adam on the survival loss. Deterministic under cfg.seed.
inline GammaTrainResult train_gamma(const std::vector<LabeledCascade>& data, const GammaConfig& cfg) {
  if (data.empty()) throw DomainError("gamma: empty training set");
  bool has_viral = false, has_nonviral = false;
  for (const auto& c : data) {
    if (c.label == Label::Viral) has_viral = true;
    if (c.label == Label::NonViral) has_nonviral = true;
  }
  if (!has_viral || !has_nonviral) throw DomainError("gamma: training set needs both classes");
  GammaTrainResult result{GammaModel(cfg), {}};
  result.loss_trace = fit_gamma(result.model, data, cfg);
  return result;
}

/// Survival curve over `horizon` bins from an r-bin censored prefix. Bins
/// before r use their own parameters; later bins hold the parameters read
/// after the last observed bin.
inline SurvivalCurve infer_survival(const GammaModel& model, const BinnedCascade& censored, std::size_t horizon) {
  const std::size_t r = censored.counts.size();
  if (r == 0) throw DomainError("infer_survival: empty observation window");
  if (r > horizon) throw DomainError("infer_survival: observation window exceeds the horizon");
  if (std::abs(censored.bin_length - model.config().bin_length) > 1e-12)
    throw StructuralError("infer_survival: bin length differs from the model's");
  tk::Tape t;
  const std::size_t steps = std::min(r + 1, horizon);
  std::vector<DistParams> params = model.decode(t, model.param_sequence(t, censored.counts, steps));
  params.resize(horizon, params.back());
  return survival_curve_from_params(model.config().family, std::move(params), model.config().bin_length, r);
}

}  // namespace vedsa
