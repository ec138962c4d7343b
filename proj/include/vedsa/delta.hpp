#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "vedsa/core.hpp"
#include "vedsa/gamma.hpp"
#include "vedsa/rng.hpp"
#include "vedsa/tensorkit.hpp"

namespace vedsa {

struct DeltaConfig {
  std::vector<std::size_t> channels{8, 16};  // one conv block per entry
  std::size_t kernel = 5;
  std::size_t pool = 2;
  double dropout = 0.3;
  std::size_t dense_hidden = 32;
  double learning_rate = 1e-3;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  std::size_t horizon = 48;  // curve length the model accepts
  bool class_weight = false;

  /// Length of the flattened feature map; throws if a kernel does not fit.
  std::size_t flat_size() const {
    std::size_t len = horizon;
    for (std::size_t c : channels) {
      (void)c;
      if (kernel > len)
        throw ConfigError("delta: kernel " + std::to_string(kernel) + " longer than feature map " + std::to_string(len));
      len = (len - kernel + 1) / pool;
      if (len == 0) throw ConfigError("delta: pooling leaves an empty feature map");
    }
    return len * (channels.empty() ? 1 : channels.back());
  }

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("delta: threshold must lie in (0, 1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("delta: dropout must lie in [0, 1)");
    if (kernel < 1 || pool < 1 || dense_hidden < 1 || batch_size < 1)
      throw ConfigError("delta: kernel, pool, dense_hidden and batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("delta: learning_rate must be positive");
    (void)flat_size();
  }
};

inline void to_json(nlohmann::json& j, const DeltaConfig& c) {
  j = {{"channels", c.channels},     {"kernel", c.kernel},
       {"pool", c.pool},             {"dropout", c.dropout},
       {"dense_hidden", c.dense_hidden}, {"learning_rate", c.learning_rate},
       {"epochs", c.epochs},         {"batch_size", c.batch_size},
       {"seed", c.seed},             {"threshold", c.threshold},
       {"horizon", c.horizon},       {"class_weight", c.class_weight}};
}

inline void from_json(const nlohmann::json& j, DeltaConfig& c) {
  DeltaConfig d;
  c.channels = j.value("channels", d.channels);
  c.kernel = j.value("kernel", d.kernel);
  c.pool = j.value("pool", d.pool);
  c.dropout = j.value("dropout", d.dropout);
  c.dense_hidden = j.value("dense_hidden", d.dense_hidden);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.seed = j.value("seed", d.seed);
  c.threshold = j.value("threshold", d.threshold);
  c.horizon = j.value("horizon", d.horizon);
  c.class_weight = j.value("class_weight", d.class_weight);
}

struct Prediction {
  std::string id;
  double probability = 0.0;
  int label = 0;
};

inline Prediction make_prediction(std::string id, double p, double threshold) {
  return {std::move(id), p, p >= threshold ? 1 : 0};
}

namespace detail {

inline void require_both_classes(std::span<const int> labels, const char* who) {
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw DomainError(std::string(who) + ": labels must be 0 or 1");
    (y ? pos : neg) = true;
  }
  if (!pos || !neg) throw DomainError(std::string(who) + ": training data needs both classes");
}

inline std::vector<double> class_weights(std::span<const int> labels, bool enabled) {
  std::vector<double> w(labels.size(), 1.0);
  if (!enabled) return w;
  double npos = 0;
  for (int y : labels) npos += y;
  const double n = static_cast<double>(labels.size());
  const double wpos = n / (2.0 * npos), wneg = n / (2.0 * (n - npos));
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] ? wpos : wneg;
  return w;
}

}  // namespace detail

/// Convolutional discriminator over a survival curve:
///   [conv -> relu -> maxpool] per block -> dropout -> flatten -> dense relu -> dense -> sigmoid
class DeltaModel {
 public:
  explicit DeltaModel(DeltaConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(cfg_.seed, 0x64656c7461ULL));
    std::size_t in = 1;
    for (std::size_t ch : cfg_.channels) {
      convs_.emplace_back(in, ch, cfg_.kernel, rng);
      in = ch;
    }
    hidden_ = tk::Dense(cfg_.flat_size(), cfg_.dense_hidden, tk::Activation::Relu, rng);
    out_ = tk::Dense(cfg_.dense_hidden, 1, tk::Activation::Identity, rng);
  }

  const DeltaConfig& config() const { return cfg_; }

  tk::NamedParams parameters() {
    tk::NamedParams out;
    for (std::size_t k = 0; k < convs_.size(); ++k) convs_[k].collect(out, "conv" + std::to_string(k));
    hidden_.collect(out, "dense0");
    out_.collect(out, "dense1");
    return out;
  }

  /// Logit for one curve. Dropout is active only when `train` is set.
  tk::Var logit(tk::Tape& t, std::span<const double> curve, bool train, Rng& rng) const {
    if (curve.size() != cfg_.horizon)
      throw StructuralError("delta: curve of length " + std::to_string(curve.size()) + ", model expects " +
                            std::to_string(cfg_.horizon));
    tk::Var x = t.constant({1, curve.size()}, std::vector<double>(curve.begin(), curve.end()));
    for (const auto& conv : convs_) {
      x = tk::activate(t, conv.forward(t, x), tk::Activation::Relu);
      x = tk::maxpool1d(t, x, cfg_.pool);
    }
    x = tk::dropout(t, x, cfg_.dropout, rng, train);
    x = tk::reshape(t, x, {t.value(x).size()});
    return out_.forward(t, hidden_.forward(t, x));
  }

  double probability(std::span<const double> curve) const {
    tk::Tape t;
    Rng unused(0);
    return tk::sigmoid(t.scalar(logit(t, curve, false, unused)));
  }

  double probability(const SurvivalCurve& c) const { return probability(c.values); }

  nlohmann::json checkpoint() { return tk::make_checkpoint("delta", cfg_, parameters()); }

  static DeltaModel from_checkpoint(const nlohmann::json& j) {
    tk::check_checkpoint(j, "delta");
    DeltaModel m(j.at("config").get<DeltaConfig>());
    tk::params_from_json(j.at("params"), m.parameters());
    return m;
  }

 private:
  DeltaConfig cfg_;
  std::vector<tk::Conv1d> convs_;
  tk::Dense hidden_;
  tk::Dense out_;
};

struct DeltaTrainResult {
  DeltaModel model;
  std::vector<double> loss_trace;  // mean (weighted) cross-entropy per epoch
};

/// Binary cross-entropy with Adam; deterministic under cfg.seed.
inline DeltaTrainResult train_delta(const std::vector<std::vector<double>>& curves, const std::vector<int>& labels,
                                    const DeltaConfig& cfg) {
  if (curves.size() != labels.size()) throw StructuralError("delta: curves and labels differ in count");
  if (curves.empty()) throw DomainError("delta: empty training set");
  detail::require_both_classes(labels, "delta");
  DeltaTrainResult result{DeltaModel(cfg), {}};
  DeltaModel& model = result.model;
  tk::NamedParams params = model.parameters();
  tk::Adam opt(params, {.learning_rate = cfg.learning_rate});
  Rng order_rng(derive_seed(cfg.seed, 0x6f72646572ULL));
  Rng drop_rng(derive_seed(cfg.seed, 0x64726f70ULL));
  const auto weights = detail::class_weights(labels, cfg.class_weight);
  std::vector<std::size_t> order(curves.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      tk::zero_grads(params);
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        tk::Tape t;
        tk::Var z = model.logit(t, curves[i], true, drop_rng);
        tk::Var l = tk::bce_with_logit(t, z, labels[i], weights[i]);
        total += t.scalar(l);
        t.backward(tk::scale(t, l, inv));
        t.accumulate_into(params);
      }
      opt.step();
    }
    const double mean = total / static_cast<double>(curves.size());
    if (!std::isfinite(mean)) throw NumericError("delta: training loss diverged at epoch " + std::to_string(epoch));
    result.loss_trace.push_back(mean);
  }
  return result;
}

inline DeltaTrainResult train_delta(const std::vector<SurvivalCurve>& curves, const std::vector<int>& labels,
                                    const DeltaConfig& cfg) {
  std::vector<std::vector<double>> values;
  values.reserve(curves.size());
  for (const auto& c : curves) values.push_back(c.values);
  return train_delta(values, labels, cfg);
}

inline Prediction forward_delta(const DeltaModel& model, const SurvivalCurve& curve, std::string id = {}) {
  return make_prediction(std::move(id), model.probability(curve), model.config().threshold);
}

struct PipelineConfig {
  double window_hours = 24.0;
  double threshold = 0.5;
};

/// rho = delta o gamma on one censored cascade: bin the observed window,
/// infer the survival curve, classify it.
inline Prediction predict_pipeline(const GammaModel& gamma, const DeltaModel& delta, const Cascade& censored,
                                   const PipelineConfig& cfg) {
  const GammaConfig& g = gamma.config();
  if (g.horizon != delta.config().horizon)
    throw StructuralError("pipeline: gamma horizon " + std::to_string(g.horizon) + " != delta horizon " +
                          std::to_string(delta.config().horizon));
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("pipeline: threshold must lie in (0, 1)");
  BinnedCascade binned{{}, g.bin_length, 0};
  if (cfg.window_hours >= g.bin_length) binned = bin_cascade(censored, g.bin_length, cfg.window_hours);
  SurvivalCurve curve = infer_survival(gamma, binned, g.horizon);
  return make_prediction(censored.id, delta.probability(curve), cfg.threshold);
}

// ---------------------------------------------------------------------------
// Logistic regression on ln(1 + count) of the observed bins.

struct LinearConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 300;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  bool class_weight = false;
};

inline void to_json(nlohmann::json& j, const LinearConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"epochs", c.epochs}, {"seed", c.seed},
       {"threshold", c.threshold}, {"class_weight", c.class_weight}};
}

inline void from_json(const nlohmann::json& j, LinearConfig& c) {
  LinearConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.epochs = j.value("epochs", d.epochs);
  c.seed = j.value("seed", d.seed);
  c.threshold = j.value("threshold", d.threshold);
  c.class_weight = j.value("class_weight", d.class_weight);
}

class LinearBaseline {
 public:
  LinearBaseline(std::size_t bins, LinearConfig cfg) : cfg_(cfg) {
    Rng rng(derive_seed(cfg_.seed, 0x6c696eULL));
    layer_ = tk::Dense(bins, 1, tk::Activation::Identity, rng);
  }

  static std::vector<double> features(std::span<const std::int64_t> counts) {
    std::vector<double> x(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) x[k] = std::log1p(static_cast<double>(counts[k]));
    return x;
  }

  tk::Var logit(tk::Tape& t, std::span<const std::int64_t> counts) const {
    if (counts.size() != layer_.in())
      throw StructuralError("linear: expected " + std::to_string(layer_.in()) + " bins, got " +
                            std::to_string(counts.size()));
    return layer_.forward(t, t.constant(features(counts)));
  }

  double probability(std::span<const std::int64_t> counts) const {
    tk::Tape t;
    return tk::sigmoid(t.scalar(logit(t, counts)));
  }

  Prediction predict(const BinnedCascade& b, std::string id = {}) const {
    return make_prediction(std::move(id), probability(b.counts), cfg_.threshold);
  }

  tk::NamedParams parameters() {
    tk::NamedParams out;
    layer_.collect(out, "linear");
    return out;
  }

  const LinearConfig& config() const { return cfg_; }

 private:
  LinearConfig cfg_;
  tk::Dense layer_;
};

/// Full-batch Adam on the mean cross-entropy.
inline LinearBaseline linear_baseline_train(const std::vector<BinnedCascade>& data, const std::vector<int>& labels,
                                            const LinearConfig& cfg) {
  if (data.size() != labels.size()) throw StructuralError("linear: inputs and labels differ in count");
  if (data.empty()) throw DomainError("linear: empty training set");
  detail::require_both_classes(labels, "linear");
  LinearBaseline model(data.front().counts.size(), cfg);
  tk::NamedParams params = model.parameters();
  tk::Adam opt(params, {.learning_rate = cfg.learning_rate});
  const auto weights = detail::class_weights(labels, cfg.class_weight);
  const double inv = 1.0 / static_cast<double>(data.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    tk::zero_grads(params);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      tk::Tape t;
      tk::Var l = tk::bce_with_logit(t, model.logit(t, data[i].counts), labels[i], weights[i]);
      total += t.scalar(l);
      t.backward(tk::scale(t, l, inv));
      t.accumulate_into(params);
    }
    if (!std::isfinite(total)) throw NumericError("linear: training loss diverged");
    opt.step();
  }
  return model;
}

inline Prediction linear_baseline_predict(const LinearBaseline& model, const BinnedCascade& b, std::string id = {}) {
  return model.predict(b, std::move(id));
}

}  // namespace vedsa
