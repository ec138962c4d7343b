#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vedsa/core.hpp"
#include "vedsa/delta.hpp"
#include "vedsa/gamma.hpp"
#include "vedsa/ingest.hpp"
#include "vedsa/synth.hpp"

namespace vedsa {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Binary evaluation with "viral" as the positive class; metrics in percent.
struct EvalReport {
  std::string dataset;
  std::string family;
  double window_hours = 0.0;
  std::uint64_t seed = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  ClassMetrics nonviral;
  ClassMetrics viral;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

namespace detail {
inline double pct_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}
inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }
}  // namespace detail

/// Undefined ratios (no predictions of a class) are reported as 0, never NaN.
inline EvalReport compute_metrics(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw StructuralError("metrics: predictions and labels differ in count");
  if (truth.empty()) throw DomainError("metrics: no predictions to evaluate");
  EvalReport r;
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i], p = predicted[i];
    if ((y != 0 && y != 1) || (p != 0 && p != 1)) throw DomainError("metrics: labels must be 0 or 1");
    (y ? pos : neg) = true;
    if (y && p) ++r.tp;
    else if (!y && p) ++r.fp;
    else if (!y && !p) ++r.tn;
    else ++r.fn;
  }
  if (!pos || !neg) throw DomainError("metrics: labels contain a single class");
  r.viral.precision = detail::pct_ratio(r.tp, r.tp + r.fp);
  r.viral.recall = detail::pct_ratio(r.tp, r.tp + r.fn);
  r.viral.f1 = detail::harmonic(r.viral.precision, r.viral.recall);
  r.nonviral.precision = detail::pct_ratio(r.tn, r.tn + r.fn);
  r.nonviral.recall = detail::pct_ratio(r.tn, r.tn + r.fp);
  r.nonviral.f1 = detail::harmonic(r.nonviral.precision, r.nonviral.recall);
  r.accuracy = detail::pct_ratio(r.tp + r.tn, truth.size());
  r.macro_f1 = 0.5 * (r.viral.f1 + r.nonviral.f1);
  return r;
}

inline EvalReport compute_metrics(const std::vector<Prediction>& predictions, std::span<const int> truth) {
  std::vector<int> p;
  p.reserve(predictions.size());
  for (const auto& x : predictions) p.push_back(x.label);
  return compute_metrics(std::span<const int>(p), truth);
}

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::string dataset = "synthetic";
  std::string input;  // corpus path; unused for synthetic runs
  std::optional<std::int64_t> zeta1, zeta2;  // calibrated when absent
  std::optional<double> target_viral_ratio;
  double bin_length = 1.0;
  std::size_t horizon = 48;  // T_max in bins
  std::vector<double> windows{2, 6, 10, 14, 18, 24};
  std::vector<DistFamily> families{DistFamily::Exponential, DistFamily::Rayleigh, DistFamily::Weibull};
  bool include_linear = true;
  GammaConfig gamma;
  DeltaConfig delta;
  LinearConfig linear;
  SplitSpec split;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  SynthSpec synth;
  std::optional<std::size_t> weibo_sample = 30000;

  void validate() const {
    if (!(bin_length > 0.0)) throw ConfigError("bin_length must be positive");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (families.empty() && !include_linear) throw ConfigError("nothing to evaluate");
    for (double w : windows) window_bins(w);
    split.validate();
  }

  /// Bins in a `hours` window; throws unless it is a positive multiple of
  /// bin_length that fits in the horizon.
  std::size_t window_bins(double hours) const {
    const std::size_t r = detail::bin_count(bin_length, hours);
    if (r > horizon)
      throw ConfigError("window of " + std::to_string(hours) + " h exceeds the horizon of " +
                        std::to_string(horizon) + " bins");
    return r;
  }

  GammaConfig gamma_for(DistFamily f) const {
    GammaConfig g = gamma;
    g.family = f;
    g.bin_length = bin_length;
    g.horizon = horizon;
    g.seed = derive_seed(seed, 0x67, static_cast<std::uint64_t>(f));
    return g;
  }

  DeltaConfig delta_for(const std::string& family, double window) const {
    DeltaConfig d = delta;
    d.horizon = horizon;
    d.seed = derive_seed(seed, hash_name(family) ^ 0x64,
                         static_cast<std::uint64_t>(std::llround(window * 1000.0)));
    d.class_weight = d.class_weight || split.balance == Balance::ClassWeight;
    return d;
  }

  LinearConfig linear_for(double window) const {
    LinearConfig l = linear;
    l.seed = derive_seed(seed, 0x6c, static_cast<std::uint64_t>(std::llround(window * 1000.0)));
    l.class_weight = l.class_weight || split.balance == Balance::ClassWeight;
    return l;
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  std::vector<std::string> fams;
  for (auto f : c.families) fams.emplace_back(to_string(f));
  j = {{"dataset", c.dataset},
       {"input", c.input},
       {"bin_length", c.bin_length},
       {"horizon", c.horizon},
       {"windows", c.windows},
       {"families", fams},
       {"include_linear", c.include_linear},
       {"gamma", c.gamma},
       {"delta", c.delta},
       {"linear", c.linear},
       {"split",
        {{"seed", c.split.seed}, {"train_fraction", c.split.train_fraction}, {"balance", to_string(c.split.balance)}}},
       {"seed", c.seed},
       {"output_dir", c.output_dir},
       {"synth", c.synth}};
  if (c.zeta1) j["zeta1"] = *c.zeta1;
  if (c.zeta2) j["zeta2"] = *c.zeta2;
  if (c.target_viral_ratio) j["target_viral_ratio"] = *c.target_viral_ratio;
  j["weibo_sample"] = c.weibo_sample ? nlohmann::json(*c.weibo_sample) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  RunConfig d;
  c.dataset = j.value("dataset", d.dataset);
  dataset_from_string(c.dataset);
  c.input = j.value("input", d.input);
  if (j.contains("zeta1")) c.zeta1 = j.at("zeta1").get<std::int64_t>();
  if (j.contains("zeta2")) c.zeta2 = j.at("zeta2").get<std::int64_t>();
  if (j.contains("target_viral_ratio")) c.target_viral_ratio = j.at("target_viral_ratio").get<double>();
  c.bin_length = j.value("bin_length", d.bin_length);
  c.horizon = j.value("horizon", d.horizon);
  c.windows = j.value("windows", d.windows);
  if (j.contains("families")) {
    c.families.clear();
    for (const auto& s : j.at("families")) c.families.push_back(family_from_string(s.get<std::string>()));
  }
  c.include_linear = j.value("include_linear", d.include_linear);
  c.gamma = j.contains("gamma") ? j.at("gamma").get<GammaConfig>() : d.gamma;
  c.delta = j.contains("delta") ? j.at("delta").get<DeltaConfig>() : d.delta;
  c.linear = j.contains("linear") ? j.at("linear").get<LinearConfig>() : d.linear;
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.split.seed = s.value("seed", d.split.seed);
    c.split.train_fraction = s.value("train_fraction", d.split.train_fraction);
    c.split.balance = balance_from_string(s.value("balance", std::string(to_string(d.split.balance))));
  }
  c.seed = j.value("seed", d.seed);
  c.output_dir = j.value("output_dir", d.output_dir);
  c.synth = j.contains("synth") ? j.at("synth").get<SynthSpec>() : d.synth;
  if (j.contains("weibo_sample")) {
    if (j.at("weibo_sample").is_null()) c.weibo_sample.reset();
    else c.weibo_sample = j.at("weibo_sample").get<std::size_t>();
  }
}

inline RunConfig load_run_config(const std::string& path) {
  try {
    auto j = tk::read_json_file(path);
    return j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid run config '" + path + "': " + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
}

inline std::vector<Cascade> load_cascades(const RunConfig& run) {
  switch (dataset_from_string(run.dataset)) {
    case DatasetName::Twitter: return parse_twitter(run.input).cascades;
    case DatasetName::Digg: return parse_digg(run.input).cascades;
    case DatasetName::Weibo: return parse_weibo(run.input, run.weibo_sample, run.seed).cascades;
    case DatasetName::Canonical: return read_canonical(run.input);
    case DatasetName::Synthetic: {
      if (!run.input.empty()) return read_canonical(run.input);
      SynthSpec spec = run.synth;
      spec.bin_length = run.bin_length;
      std::vector<Cascade> out;
      for (auto& r : gen_dataset(spec).records) out.push_back(std::move(r.cascade));
      return out;
    }
  }
  return {};
}

inline ViralityConfig resolve_thresholds(const RunConfig& run, const std::vector<Cascade>& cascades) {
  if (run.zeta1 && run.zeta2) return {*run.zeta1, *run.zeta2, run.horizon};
  const DatasetName name = dataset_from_string(run.dataset);
  if (name == DatasetName::Synthetic) {
    ViralityConfig v = run.synth.virality();
    v.max_len = run.horizon;
    return v;
  }
  return calibrate_thresholds(cascades, run.target_viral_ratio.value_or(default_viral_ratio(name)), run.horizon);
}

struct PreparedData {
  ViralityConfig virality;
  DatasetSplit split;
};

inline PreparedData prepare_data(const RunConfig& run, const std::vector<Cascade>& cascades) {
  run.validate();
  PreparedData p;
  p.virality = resolve_thresholds(run, cascades);
  SplitSpec s = run.split;
  p.split = build_dataset(cascades, p.virality, s, run.bin_length, static_cast<double>(run.horizon) * run.bin_length);
  return p;
}

inline std::vector<int> labels_of(const std::vector<LabeledCascade>& cs) {
  std::vector<int> y;
  y.reserve(cs.size());
  for (const auto& c : cs) y.push_back(c.label == Label::Viral ? 1 : 0);
  return y;
}

inline std::vector<SurvivalCurve> infer_curves(const GammaModel& g, const std::vector<LabeledCascade>& cs,
                                               std::size_t bins, std::size_t horizon) {
  std::vector<SurvivalCurve> out;
  out.reserve(cs.size());
  for (const auto& c : cs) out.push_back(infer_survival(g, c.binned.prefix(bins), horizon));
  return out;
}

/// Trains delta on train-set curves at one window and scores the test set.
inline EvalReport evaluate_window(const RunConfig& run, const GammaModel& gamma, const DatasetSplit& data,
                                  double window) {
  const std::size_t r = run.window_bins(window);
  const std::string fam = to_string(gamma.config().family);
  auto train_curves = infer_curves(gamma, data.train, r, run.horizon);
  auto test_curves = infer_curves(gamma, data.test, r, run.horizon);
  DeltaConfig dc = run.delta_for(fam, window);
  DeltaModel delta = train_delta(train_curves, labels_of(data.train), dc).model;
  std::vector<int> pred;
  pred.reserve(test_curves.size());
  for (const auto& c : test_curves) pred.push_back(delta.probability(c) >= dc.threshold ? 1 : 0);
  auto truth = labels_of(data.test);
  EvalReport rep = compute_metrics(std::span<const int>(pred), std::span<const int>(truth));
  rep.dataset = run.dataset;
  rep.family = fam;
  rep.window_hours = window;
  rep.seed = run.seed;
  return rep;
}

inline EvalReport evaluate_linear(const RunConfig& run, const DatasetSplit& data, double window) {
  const std::size_t r = run.window_bins(window);
  std::vector<BinnedCascade> train, test;
  for (const auto& c : data.train) train.push_back(c.binned.prefix(r));
  for (const auto& c : data.test) test.push_back(c.binned.prefix(r));
  LinearConfig lc = run.linear_for(window);
  LinearBaseline model = linear_baseline_train(train, labels_of(data.train), lc);
  std::vector<int> pred;
  for (const auto& b : test) pred.push_back(model.predict(b).label);
  auto truth = labels_of(data.test);
  EvalReport rep = compute_metrics(std::span<const int>(pred), std::span<const int>(truth));
  rep.dataset = run.dataset;
  rep.family = "linear";
  rep.window_hours = window;
  rep.seed = run.seed;
  return rep;
}

/// Family x window grid: one gamma per family shared across windows, delta
/// retrained per window. Rows come in (family, window) order with the linear
/// baseline last.
inline std::vector<EvalReport> window_sweep(const RunConfig& run, const DatasetSplit& data) {
  run.validate();
  std::vector<EvalReport> out;
  for (DistFamily f : run.families) {
    GammaModel gamma = train_gamma(data.train, run.gamma_for(f)).model;
    for (double w : run.windows) out.push_back(evaluate_window(run, gamma, data, w));
  }
  if (run.include_linear)
    for (double w : run.windows) out.push_back(evaluate_linear(run, data, w));
  return out;
}

inline std::vector<EvalReport> window_sweep(const RunConfig& run) {
  auto cascades = load_cascades(run);
  return window_sweep(run, prepare_data(run, cascades).split);
}

// ---------------------------------------------------------------------------
// Report files

enum class ReportFormat { Csv, Json };

inline constexpr const char* kReportCsvHeader = "dataset,family,window_hours,class,precision,recall,f1,accuracy,seed";

inline std::string fmt2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string fmt_window(double w) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", w);
  return buf;
}

inline double round2(double x) { return std::stod(fmt2(x)); }

inline void write_report_csv(const std::vector<EvalReport>& reports, std::ostream& out) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    const struct {
      const char* name;
      double p, rc, f1;
    } rows[] = {{"nonviral", r.nonviral.precision, r.nonviral.recall, r.nonviral.f1},
                {"viral", r.viral.precision, r.viral.recall, r.viral.f1},
                {"macro", 0.5 * (r.nonviral.precision + r.viral.precision),
                 0.5 * (r.nonviral.recall + r.viral.recall), r.macro_f1}};
    for (const auto& row : rows)
      out << r.dataset << ',' << r.family << ',' << fmt_window(r.window_hours) << ',' << row.name << ','
          << fmt2(row.p) << ',' << fmt2(row.rc) << ',' << fmt2(row.f1) << ',' << fmt2(r.accuracy) << ',' << r.seed
          << '\n';
  }
}

/// Long format: one {dataset, family, window_hours, metric, value} row per number.
inline nlohmann::json report_json(const std::vector<EvalReport>& reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) {
    const std::pair<const char*, double> metrics[] = {
        {"accuracy", r.accuracy},
        {"precision_nonviral", r.nonviral.precision},
        {"recall_nonviral", r.nonviral.recall},
        {"f1_nonviral", r.nonviral.f1},
        {"precision_viral", r.viral.precision},
        {"recall_viral", r.viral.recall},
        {"f1_viral", r.viral.f1},
        {"f1_macro", r.macro_f1},
        {"tp", static_cast<double>(r.tp)},
        {"fp", static_cast<double>(r.fp)},
        {"tn", static_cast<double>(r.tn)},
        {"fn", static_cast<double>(r.fn)}};
    for (const auto& [name, value] : metrics)
      rows.push_back({{"dataset", r.dataset},
                      {"family", r.family},
                      {"window_hours", r.window_hours},
                      {"metric", name},
                      {"value", round2(value)},
                      {"seed", r.seed}});
  }
  return {{"format", "vedsa-report"}, {"version", 1}, {"rows", rows}};
}

inline void emit_report(const std::vector<EvalReport>& reports, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  if (format == ReportFormat::Csv) write_report_csv(reports, out);
  else out << report_json(reports).dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

struct ReportRow {
  std::string dataset, family, cls;
  double window_hours = 0, precision = 0, recall = 0, f1 = 0, accuracy = 0;
  std::uint64_t seed = 0;
  bool operator==(const ReportRow&) const = default;
};

inline std::vector<ReportRow> parse_report_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line) || line != kReportCsvHeader) throw ParseError(source, 1, "unexpected report header");
  std::vector<ReportRow> rows;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    auto f = detail::split(line, ",", false);
    if (f.size() != 9) throw ParseError(source, ln, "expected 9 columns");
    auto num = [&](std::string_view s) {
      auto v = detail::to_double(s);
      if (!v) throw ParseError(source, ln, "bad number '" + std::string(s) + "'");
      return *v;
    };
    auto seed = detail::to_int(f[8]);
    if (!seed) throw ParseError(source, ln, "bad seed");
    rows.push_back({std::string(f[0]), std::string(f[1]), std::string(f[3]), num(f[2]), num(f[4]), num(f[5]),
                    num(f[6]), num(f[7]), static_cast<std::uint64_t>(*seed)});
  }
  return rows;
}

inline std::vector<ReportRow> parse_report_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_report_csv(in, path);
}

// ---------------------------------------------------------------------------
// Prediction files: one {"id", "p", "label"} record per line.

inline void write_predictions(const std::vector<Prediction>& preds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& p : preds) out << nlohmann::json{{"id", p.id}, {"p", p.probability}, {"label", p.label}}.dump() << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<Prediction> read_predictions(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<Prediction> out;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("p").get<double>(), j.at("label").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, ln, e.what());
    }
  }
  return out;
}

}  // namespace vedsa
