#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vedsa/eval.hpp"

namespace vedsa {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kRuntime = 1;
inline constexpr int kUsage = 2;
inline constexpr int kConfig = 3;
inline constexpr int kIo = 4;
inline constexpr int kNumeric = 5;
inline constexpr int kGradCheck = 6;
}  // namespace exit_code

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return exit_code::kConfig;
    case ErrorKind::Usage: return exit_code::kUsage;
    case ErrorKind::Parse:
    case ErrorKind::Io: return exit_code::kIo;
    case ErrorKind::Numeric: return exit_code::kNumeric;
    default: return exit_code::kRuntime;
  }
}

namespace detail {

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset, input, output_dir;
  std::optional<std::size_t> gamma_epochs, delta_epochs;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "run configuration (JSON)")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "override the run seed");
    app->add_option("--dataset", dataset, "twitter | digg | weibo | canonical | synthetic");
    app->add_option("--input", input, "corpus path");
    app->add_option("--output-dir", output_dir, "directory for default outputs");
    app->add_option("--gamma-epochs", gamma_epochs, "override gamma epochs");
    app->add_option("--delta-epochs", delta_epochs, "override delta epochs");
  }

  RunConfig load() const {
    RunConfig run = config.empty() ? RunConfig{} : load_run_config(config);
    if (seed) run.seed = *seed;
    if (dataset) run.dataset = *dataset;
    if (input) run.input = *input;
    if (output_dir) run.output_dir = *output_dir;
    if (gamma_epochs) run.gamma.epochs = *gamma_epochs;
    if (delta_epochs) run.delta.epochs = *delta_epochs;
    dataset_from_string(run.dataset);
    run.validate();
    return run;
  }
};

inline std::string out_path(const RunConfig& run, const std::string& given, const std::string& fallback) {
  if (!given.empty()) return given;
  std::filesystem::create_directories(run.output_dir);
  return (std::filesystem::path(run.output_dir) / fallback).string();
}

inline std::string window_tag(double w) { return fmt_window(w) + "h"; }

inline GammaModel load_gamma(const std::string& path) { return GammaModel::from_checkpoint(tk::read_json_file(path)); }
inline DeltaModel load_delta(const std::string& path) { return DeltaModel::from_checkpoint(tk::read_json_file(path)); }

inline ReportFormat format_from_string(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw UsageError("unknown report format '" + s + "'");
}

/// Random small cascade with a consistent sigma sequence, for gradient checks.
inline LabeledCascade random_labeled(Rng& rng, std::size_t horizon, double bin_length) {
  LabeledCascade c;
  c.id = "gc";
  c.binned = {std::vector<std::int64_t>(horizon, 0), bin_length, horizon};
  const std::int64_t zeta2 = 4 + static_cast<std::int64_t>(rng.index(20));
  std::int64_t total = 1;
  for (std::size_t j = 0; j < horizon; ++j) {
    c.binned.counts[j] = static_cast<std::int64_t>(rng.index(5));
    total += c.binned.counts[j];
    if (total >= zeta2 && !c.viral_time) c.viral_time = j;
    c.sigma.push_back(c.viral_time ? 1 : 0);
  }
  c.label = c.viral_time ? Label::Viral : Label::NonViral;
  return c;
}

}  // namespace detail

struct GradCheckSummary {
  std::string name;
  tk::GradCheckReport report;
};

/// Gradient checks of the full gamma graph for each family and of the delta
/// graph (dropout off) on random inputs.
inline std::vector<GradCheckSummary> run_gradchecks(const RunConfig& run, std::size_t configurations) {
  std::vector<GradCheckSummary> out;
  Rng rng(derive_seed(run.seed, 0x6763));
  for (std::size_t k = 0; k < configurations; ++k) {
    for (DistFamily f : run.families) {
      GammaConfig gc = run.gamma_for(f);
      gc.seed = derive_seed(run.seed, k, static_cast<std::uint64_t>(f));
      GammaModel model(gc);
      LabeledCascade c = detail::random_labeled(rng, gc.horizon, gc.bin_length);
      auto params = model.parameters();
      auto rep = tk::grad_check(params, [&](tk::Tape& t) { return model.loss(t, c); }, 1e-3, 16, gc.seed);
      out.push_back({std::string("gamma/") + to_string(f), rep});
    }
    DeltaConfig dc = run.delta_for("gradcheck", static_cast<double>(k));
    DeltaModel model(dc);
    std::vector<double> curve(dc.horizon);
    double s = 1.0;
    for (auto& v : curve) v = (s *= rng.uniform(0.85, 1.0));
    const int y = static_cast<int>(rng.index(2));
    auto params = model.parameters();
    auto rep = tk::grad_check(
        params,
        [&](tk::Tape& t) {
          Rng unused(0);
          return tk::bce_with_logit(t, model.logit(t, curve, false, unused), y, 1.0);
        },
        1e-3, 16, dc.seed);
    out.push_back({"delta", rep});
  }
  return out;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Early viral cascade detection with deep survival analysis", "vedsa"};
  app.require_subcommand(1);

  detail::CommonOpts common;
  std::string output, gamma_path, delta_path, format = "csv", family_name = "weibull";
  double window = 24.0, threshold = 1e-4;
  std::size_t configs = 5;

  auto* ingest = app.add_subcommand("ingest", "parse a corpus into the canonical cascade format");
  auto* synth = app.add_subcommand("synth", "generate a synthetic oracle dataset");
  auto* train_g = app.add_subcommand("train-gamma", "fit the survival model");
  auto* train_d = app.add_subcommand("train-delta", "fit the curve classifier at one window");
  auto* predict = app.add_subcommand("predict", "classify censored cascades");
  auto* eval = app.add_subcommand("eval", "evaluate trained models on the test split");
  auto* sweep = app.add_subcommand("sweep", "family x window evaluation grid");
  auto* gradcheck = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");

  for (auto* s : {ingest, synth, train_g, train_d, predict, eval, sweep, gradcheck}) common.add_to(s);
  for (auto* s : {ingest, synth, train_g, train_d, predict, eval, sweep})
    s->add_option("-o,--output", output, "output file");
  for (auto* s : {train_g, train_d, eval, sweep, predict})
    if (s != sweep) s->add_option("--family", family_name, "exponential | rayleigh | weibull");
  for (auto* s : {train_d, predict, eval}) s->add_option("--window", window, "observation window in hours");
  for (auto* s : {train_d, predict, eval}) s->add_option("--gamma", gamma_path, "gamma checkpoint")->required();
  for (auto* s : {predict, eval}) s->add_option("--delta", delta_path, "delta checkpoint")->required();
  for (auto* s : {eval, sweep}) s->add_option("--format", format, "csv | json");
  gradcheck->add_option("--threshold", threshold, "maximum allowed relative error");
  gradcheck->add_option("--configurations", configs, "random configurations per graph");

  if (argc <= 1) {
    out << app.help();
    return exit_code::kUsage;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "vedsa: usage error: " << e.what() << "\n";
    return exit_code::kUsage;
  }

  try {
    RunConfig run = common.load();

    if (*ingest) {
      const DatasetName name = dataset_from_string(run.dataset);
      if (name == DatasetName::Synthetic) throw UsageError("ingest: use 'synth' for synthetic data");
      if (run.input.empty()) throw UsageError("ingest: --input is required");
      auto cascades = load_cascades(run);
      auto m = make_manifest(name, run.input, cascades);
      const std::string path = detail::out_path(run, output, "cascades.jsonl");
      write_canonical(cascades, path);
      out << "dataset=" << to_string(m.name) << " cascades=" << m.cascade_count << " reshares=" << m.reshare_count
          << " output=" << path << "\n";
    } else if (*synth) {
      SynthSpec spec = run.synth;
      if (common.seed) spec.seed = run.seed;
      SynthDataset ds = gen_dataset(spec);
      std::vector<Cascade> cascades;
      for (const auto& r : ds.records) cascades.push_back(r.cascade);
      const std::string path = detail::out_path(run, output, "synthetic.jsonl");
      write_canonical(cascades, path);
      write_truth(ds, spec.family, path + ".truth");
      out << "cascades=" << cascades.size() << " resampled=" << ds.first_draw_disagreements << " output=" << path
          << "\n";
    } else if (*train_g) {
      const DistFamily f = family_from_string(family_name);
      auto data = prepare_data(run, load_cascades(run));
      auto res = train_gamma(data.split.train, run.gamma_for(f));
      const std::string path = detail::out_path(run, output, std::string("gamma-") + to_string(f) + ".json");
      tk::write_json_file(res.model.checkpoint(), path);
      out << "family=" << to_string(f) << " train=" << data.split.train.size()
          << " final_loss=" << (res.loss_trace.empty() ? 0.0 : res.loss_trace.back()) << " output=" << path << "\n";
    } else if (*train_d) {
      GammaModel g = detail::load_gamma(gamma_path);
      if (g.config().horizon != run.horizon || g.config().bin_length != run.bin_length)
        throw StructuralError("train-delta: gamma checkpoint grid differs from the run configuration");
      auto data = prepare_data(run, load_cascades(run));
      const std::string fam = to_string(g.config().family);
      auto curves = infer_curves(g, data.split.train, run.window_bins(window), run.horizon);
      auto res = train_delta(curves, labels_of(data.split.train), run.delta_for(fam, window));
      const std::string path =
          detail::out_path(run, output, "delta-" + fam + "-" + detail::window_tag(window) + ".json");
      tk::write_json_file(res.model.checkpoint(), path);
      out << "family=" << fam << " window=" << fmt_window(window) << " output=" << path << "\n";
    } else if (*predict) {
      GammaModel g = detail::load_gamma(gamma_path);
      DeltaModel d = detail::load_delta(delta_path);
      run.window_bins(window);
      PipelineConfig pc{window, d.config().threshold};
      std::vector<Prediction> preds;
      for (const auto& c : load_cascades(run)) preds.push_back(predict_pipeline(g, d, censor(c, window), pc));
      const std::string path = detail::out_path(run, output, "predictions.jsonl");
      write_predictions(preds, path);
      out << "predictions=" << preds.size() << " output=" << path << "\n";
    } else if (*eval) {
      GammaModel g = detail::load_gamma(gamma_path);
      DeltaModel d = detail::load_delta(delta_path);
      auto data = prepare_data(run, load_cascades(run));
      auto curves = infer_curves(g, data.split.test, run.window_bins(window), run.horizon);
      std::vector<int> pred;
      for (const auto& c : curves) pred.push_back(d.probability(c) >= d.config().threshold ? 1 : 0);
      auto truth = labels_of(data.split.test);
      EvalReport rep = compute_metrics(std::span<const int>(pred), std::span<const int>(truth));
      rep.dataset = run.dataset;
      rep.family = to_string(g.config().family);
      rep.window_hours = window;
      rep.seed = run.seed;
      const auto fmt = detail::format_from_string(format);
      const std::string path = detail::out_path(run, output, "eval." + format);
      emit_report({rep}, fmt, path);
      out << "accuracy=" << fmt2(rep.accuracy) << " f1_viral=" << fmt2(rep.viral.f1) << " output=" << path << "\n";
    } else if (*sweep) {
      const auto fmt = detail::format_from_string(format);
      auto reports = window_sweep(run);
      const std::string path = detail::out_path(run, output, "sweep." + format);
      emit_report(reports, fmt, path);
      for (const auto& r : reports)
        out << r.family << " " << fmt_window(r.window_hours) << "h accuracy=" << fmt2(r.accuracy)
            << " f1_viral=" << fmt2(r.viral.f1) << " f1_macro=" << fmt2(r.macro_f1) << "\n";
      out << "output=" << path << "\n";
    } else if (*gradcheck) {
      bool ok = true;
      for (const auto& s : run_gradchecks(run, configs)) {
        const bool pass = s.report.max_rel_error <= threshold;
        ok = ok && pass;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3e", s.report.max_rel_error);
        out << (pass ? "ok   " : "FAIL ") << s.name << " max_rel_error=" << buf << " worst=" << s.report.worst
            << " checked=" << s.report.checked << " skipped=" << s.report.skipped << "\n";
      }
      return ok ? exit_code::kOk : exit_code::kGradCheck;
    }
    return exit_code::kOk;
  } catch (const Error& e) {
    err << "vedsa: " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "vedsa: config error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "vedsa: io error: " << e.what() << "\n";
    return exit_code::kIo;
  } catch (const std::exception& e) {
    err << "vedsa: runtime error: " << e.what() << "\n";
    return exit_code::kRuntime;
  }
}

}  // namespace vedsa
