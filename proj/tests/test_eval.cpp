#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "vedsa/eval.hpp"

using namespace vedsa;
namespace fs = std::filesystem;

namespace {

const std::string kData = VEDSA_TEST_DATA;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / ("vedsa_eval_" + std::to_string(::getpid()) + "_" + name)).string();
}

EvalReport metrics(const std::vector<int>& p, const std::vector<int>& y) {
  return compute_metrics(std::span<const int>(p), std::span<const int>(y));
}

// tp, fn, fp, tn -> aligned vectors
std::pair<std::vector<int>, std::vector<int>> confusion(int tp, int fn, int fp, int tn) {
  std::vector<int> p, y;
  auto put = [&](int n, int pi, int yi) {
    for (int k = 0; k < n; ++k) p.push_back(pi), y.push_back(yi);
  };
  put(tp, 1, 1);
  put(fn, 0, 1);
  put(fp, 1, 0);
  put(tn, 0, 0);
  return {p, y};
}

void expect_sane(const EvalReport& r) {
  for (double v : {r.accuracy, r.macro_f1, r.viral.precision, r.viral.recall, r.viral.f1, r.nonviral.precision,
                   r.nonviral.recall, r.nonviral.f1}) {
    EXPECT_FALSE(std::isnan(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 100.0);
  }
}

}  // namespace

TEST(Metrics, HandExample) {
  auto [p, y] = confusion(9, 1, 1, 9);
  auto r = metrics(p, y);
  EXPECT_EQ(r.tp, 9u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.tn, 9u);
  EXPECT_DOUBLE_EQ(r.accuracy, 90.0);
  EXPECT_DOUBLE_EQ(r.viral.precision, 90.0);
  EXPECT_DOUBLE_EQ(r.viral.recall, 90.0);
  EXPECT_DOUBLE_EQ(r.viral.f1, 90.0);
  EXPECT_DOUBLE_EQ(r.nonviral.f1, 90.0);
  EXPECT_DOUBLE_EQ(r.macro_f1, 90.0);
}

TEST(Metrics, AsymmetricHandExample) {
  // tp 3, fn 1, fp 2, tn 4: viral P 3/5, R 3/4; non-viral P 4/5, R 4/6
  auto [p, y] = confusion(3, 1, 2, 4);
  auto r = metrics(p, y);
  EXPECT_DOUBLE_EQ(r.accuracy, 70.0);
  EXPECT_DOUBLE_EQ(r.viral.precision, 60.0);
  EXPECT_DOUBLE_EQ(r.viral.recall, 75.0);
  EXPECT_NEAR(r.viral.f1, 2 * 60.0 * 75.0 / 135.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.nonviral.precision, 80.0);
  EXPECT_NEAR(r.nonviral.recall, 400.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.macro_f1, 0.5 * (r.viral.f1 + r.nonviral.f1), 1e-12);
}

TEST(Metrics, PerfectPredictions) {
  auto [p, y] = confusion(4, 0, 0, 7);
  auto r = metrics(p, y);
  for (double v : {r.accuracy, r.macro_f1, r.viral.precision, r.viral.recall, r.viral.f1, r.nonviral.precision,
                   r.nonviral.recall, r.nonviral.f1})
    EXPECT_DOUBLE_EQ(v, 100.0);
}

TEST(Metrics, AllViralIsDegenerateNotNaN) {
  auto [p, y] = confusion(5, 0, 5, 0);
  auto r = metrics(p, y);
  expect_sane(r);
  EXPECT_DOUBLE_EQ(r.viral.recall, 100.0);
  EXPECT_DOUBLE_EQ(r.viral.precision, 50.0);
  EXPECT_DOUBLE_EQ(r.nonviral.recall, 0.0);
  EXPECT_DOUBLE_EQ(r.nonviral.precision, 0.0);
  EXPECT_DOUBLE_EQ(r.nonviral.f1, 0.0);
  EXPECT_DOUBLE_EQ(r.accuracy, 50.0);

  auto [q, z] = confusion(0, 3, 0, 9);  // all non-viral
  auto s = metrics(q, z);
  expect_sane(s);
  EXPECT_DOUBLE_EQ(s.viral.recall, 0.0);
  EXPECT_DOUBLE_EQ(s.viral.f1, 0.0);
  EXPECT_DOUBLE_EQ(s.nonviral.recall, 100.0);
}

TEST(Metrics, BruteForceRecount) {
  Rng rng(42);
  std::size_t checked = 0;
  for (int it = 0; it < 10000; ++it) {
    const std::size_t n = 1 + rng.index(60);
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.index(2));
      y[i] = static_cast<int>(rng.index(2));
    }
    const bool both = std::count(y.begin(), y.end(), 1) > 0 && std::count(y.begin(), y.end(), 0) > 0;
    if (!both) {
      EXPECT_THROW(metrics(p, y), DomainError);
      continue;
    }
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] == 1 && y[i] == 1) tp++;
      if (p[i] == 1 && y[i] == 0) fp++;
      if (p[i] == 0 && y[i] == 0) tn++;
      if (p[i] == 0 && y[i] == 1) fn++;
    }
    auto r = metrics(p, y);
    ASSERT_EQ(r.tp, tp);
    ASSERT_EQ(r.fp, fp);
    ASSERT_EQ(r.tn, tn);
    ASSERT_EQ(r.fn, fn);
    auto pct = [](std::size_t a, std::size_t b) { return b ? 100.0 * double(a) / double(b) : 0.0; };
    ASSERT_EQ(r.accuracy, pct(tp + tn, n));
    ASSERT_EQ(r.viral.precision, pct(tp, tp + fp));
    ASSERT_EQ(r.viral.recall, pct(tp, tp + fn));
    ASSERT_EQ(r.nonviral.precision, pct(tn, tn + fn));
    ASSERT_EQ(r.nonviral.recall, pct(tn, tn + fp));
    for (const auto* c : {&r.viral, &r.nonviral}) {
      const double h = c->precision + c->recall > 0 ? 2 * c->precision * c->recall / (c->precision + c->recall) : 0;
      ASSERT_EQ(c->f1, h);
    }
    ASSERT_EQ(r.macro_f1, 0.5 * (r.viral.f1 + r.nonviral.f1));
    expect_sane(r);
    ++checked;
  }
  EXPECT_GT(checked, 9000u);
}

TEST(Metrics, Errors) {
  EXPECT_THROW(metrics({}, {}), DomainError);
  EXPECT_THROW(metrics({1, 0}, {1}), StructuralError);
  EXPECT_THROW(metrics({1, 1}, {1, 1}), DomainError);
  EXPECT_THROW(metrics({2, 0}, {1, 0}), DomainError);
  EXPECT_THROW(metrics({1, 0}, {1, -1}), DomainError);
}

TEST(Metrics, PredictionOverload) {
  std::vector<Prediction> preds{{"a", 0.9, 1}, {"b", 0.2, 0}, {"c", 0.6, 1}};
  std::vector<int> y{1, 0, 0};
  auto r = compute_metrics(preds, y);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.tn, 1u);
}

// ---- reports ---------------------------------------------------------------

namespace {

std::vector<EvalReport> sample_reports() {
  auto [p, y] = confusion(3, 1, 2, 4);
  auto a = metrics(p, y);
  a.dataset = "digg";
  a.family = "weibull";
  a.window_hours = 2;
  a.seed = 7;
  auto [q, z] = confusion(5, 0, 5, 0);
  auto b = metrics(q, z);
  b.dataset = "digg";
  b.family = "rayleigh";
  b.window_hours = 0.5;
  b.seed = 7;
  return {a, b};
}

}  // namespace

TEST(Report, EmptyIsHeaderOnly) {
  std::ostringstream out;
  write_report_csv({}, out);
  EXPECT_EQ(out.str(), std::string(kReportCsvHeader) + "\n");
  auto path = tmp_path("empty.csv");
  emit_report({}, ReportFormat::Csv, path);
  EXPECT_EQ(slurp(path), out.str());
  std::istringstream in(out.str());
  EXPECT_TRUE(parse_report_csv(in).empty());
  emit_report({}, ReportFormat::Json, path);
  auto j = nlohmann::json::parse(slurp(path));
  EXPECT_TRUE(j.at("rows").empty());
  fs::remove(path);
}

TEST(Report, CsvLayoutAndRoundTrip) {
  auto reps = sample_reports();
  std::ostringstream out;
  write_report_csv(reps, out);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  EXPECT_EQ(line, "digg,weibull,2,nonviral,80.00,66.67,72.73,70.00,7");
  std::getline(lines, line);
  EXPECT_EQ(line, "digg,weibull,2,viral,60.00,75.00,66.67,70.00,7");

  std::istringstream in(out.str());
  auto rows = parse_report_csv(in);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t k = 0; k < reps.size(); ++k) {
    const auto& r = reps[k];
    const ReportRow* nv = &rows[3 * k];
    const ReportRow* v = &rows[3 * k + 1];
    const ReportRow* macro = &rows[3 * k + 2];
    EXPECT_EQ(nv->cls, "nonviral");
    EXPECT_EQ(macro->cls, "macro");
    EXPECT_EQ(nv->dataset, r.dataset);
    EXPECT_EQ(nv->family, r.family);
    EXPECT_EQ(nv->window_hours, r.window_hours);
    EXPECT_EQ(nv->seed, r.seed);
    EXPECT_EQ(nv->precision, round2(r.nonviral.precision));
    EXPECT_EQ(nv->recall, round2(r.nonviral.recall));
    EXPECT_EQ(v->f1, round2(r.viral.f1));
    EXPECT_EQ(v->accuracy, round2(r.accuracy));
    EXPECT_EQ(macro->f1, round2(r.macro_f1));
  }
  // writing the parsed values again reproduces the file
  std::ostringstream again;
  again << kReportCsvHeader << '\n';
  for (const auto& r : rows)
    again << r.dataset << ',' << r.family << ',' << fmt_window(r.window_hours) << ',' << r.cls << ','
          << fmt2(r.precision) << ',' << fmt2(r.recall) << ',' << fmt2(r.f1) << ',' << fmt2(r.accuracy) << ','
          << r.seed << '\n';
  EXPECT_EQ(again.str(), out.str());
}

TEST(Report, JsonIsLongFormat) {
  auto reps = sample_reports();
  auto j = report_json(reps);
  EXPECT_EQ(j.at("format"), "vedsa-report");
  EXPECT_EQ(j.at("version"), 1);
  const auto& rows = j.at("rows");
  ASSERT_EQ(rows.size(), 24u);
  EXPECT_EQ(rows[0].at("metric"), "accuracy");
  EXPECT_EQ(rows[0].at("value"), 70.0);
  EXPECT_EQ(rows[12].at("family"), "rayleigh");
  EXPECT_EQ(rows[12].at("window_hours"), 0.5);
  for (const auto& r : rows) {
    EXPECT_EQ(r.size(), 6u);
    if (r.at("metric") == "recall_nonviral" && r.at("family") == "rayleigh") EXPECT_EQ(r.at("value"), 0.0);
  }
  EXPECT_EQ(report_json(reps).dump(), j.dump());
}

TEST(Report, Errors) {
  EXPECT_THROW(emit_report({}, ReportFormat::Csv, "/nonexistent/dir/r.csv"), IoError);
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(parse_report_csv(bad_header), ParseError);
  std::istringstream short_row(std::string(kReportCsvHeader) + "\ndigg,weibull,2\n");
  try {
    parse_report_csv(short_row);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad_num(std::string(kReportCsvHeader) + "\ndigg,weibull,2,viral,x,1,1,1,1\n");
  EXPECT_THROW(parse_report_csv(bad_num), ParseError);
}

TEST(Predictions, FileRoundTrip) {
  std::vector<Prediction> ps{{"a", 0.125, 0}, {"b\"q", 0.987654321, 1}, {"c", 1.0 / 3.0, 0}};
  auto path = tmp_path("pred.jsonl");
  write_predictions(ps, path);
  auto back = read_predictions(path);
  ASSERT_EQ(back.size(), ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) {
    EXPECT_EQ(back[i].id, ps[i].id);
    EXPECT_EQ(back[i].probability, ps[i].probability);
    EXPECT_EQ(back[i].label, ps[i].label);
  }
  std::ofstream(path, std::ios::app) << "{\"id\": 3}\n";
  EXPECT_THROW(read_predictions(path), ParseError);
  fs::remove(path);
}

// ---- run config ------------------------------------------------------------

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.dataset = "digg";
  c.input = "/data/digg_votes1.csv";
  c.zeta1 = 40;
  c.zeta2 = 80;
  c.target_viral_ratio = 0.02;
  c.windows = {2, 4};
  c.families = {DistFamily::Rayleigh};
  c.split.balance = Balance::ClassWeight;
  c.weibo_sample.reset();
  c.seed = 31;
  nlohmann::json j = c;
  RunConfig back = j.get<RunConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.zeta2, 80);
  EXPECT_FALSE(back.weibo_sample);
  EXPECT_EQ(back.split.balance, Balance::ClassWeight);

  RunConfig d = nlohmann::json::object().get<RunConfig>();
  EXPECT_EQ(nlohmann::json(d), nlohmann::json(RunConfig{}));
}

TEST(RunConfig, LoadAndErrors) {
  auto run = load_run_config(kData + "/smoke_run.json");
  EXPECT_EQ(run.horizon, 24u);
  EXPECT_EQ(run.families, std::vector<DistFamily>{DistFamily::Weibull});
  EXPECT_NO_THROW(run.validate());

  auto path = tmp_path("bad.json");
  std::ofstream(path) << "{\"families\": [\"gompertz\"]}";
  EXPECT_THROW(load_run_config(path), ConfigError);
  std::ofstream(path) << "{not json";
  EXPECT_THROW(load_run_config(path), ConfigError);
  std::ofstream(path) << "{\"dataset\": \"reddit\"}";
  EXPECT_THROW(load_run_config(path), ConfigError);
  fs::remove(path);
  EXPECT_THROW(load_run_config("/nonexistent/run.json"), IoError);
}

TEST(RunConfig, WindowValidation) {
  RunConfig c;
  c.horizon = 24;
  EXPECT_EQ(c.window_bins(24), 24u);
  EXPECT_THROW(c.window_bins(25), ConfigError);
  EXPECT_THROW(c.window_bins(1.5), ConfigError);
  EXPECT_THROW(c.window_bins(0), ConfigError);
  c.windows = {2, 30};
  EXPECT_THROW(c.validate(), ConfigError);
  c.windows = {2};
  c.families.clear();
  c.include_linear = false;
  EXPECT_THROW(c.validate(), ConfigError);
  c.bin_length = 0.5;
  c.include_linear = true;
  EXPECT_EQ(c.window_bins(2), 4u);
}

TEST(RunConfig, DerivedSeedsAndWeights) {
  RunConfig c;
  c.horizon = 30;
  EXPECT_EQ(c.gamma_for(DistFamily::Rayleigh).family, DistFamily::Rayleigh);
  EXPECT_EQ(c.gamma_for(DistFamily::Rayleigh).horizon, 30u);
  EXPECT_NE(c.gamma_for(DistFamily::Rayleigh).seed, c.gamma_for(DistFamily::Weibull).seed);
  EXPECT_NE(c.delta_for("weibull", 2).seed, c.delta_for("weibull", 6).seed);
  EXPECT_NE(c.delta_for("weibull", 2).seed, c.delta_for("rayleigh", 2).seed);
  EXPECT_EQ(c.delta_for("weibull", 2).seed, c.delta_for("weibull", 2).seed);
  EXPECT_EQ(c.delta_for("weibull", 2).horizon, 30u);
  EXPECT_FALSE(c.delta_for("weibull", 2).class_weight);
  c.split.balance = Balance::ClassWeight;
  EXPECT_TRUE(c.delta_for("weibull", 2).class_weight);
  EXPECT_TRUE(c.linear_for(2).class_weight);
  EXPECT_EQ(hash_name("weibull"), hash_name("weibull"));
  EXPECT_EQ(hash_name(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(hash_name("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(RunConfig, ThresholdResolution) {
  RunConfig c;
  std::vector<Cascade> cs;
  for (int k = 1; k <= 100; ++k) cs.push_back({"c" + std::to_string(k), std::vector<double>(k, 0.0)});
  auto v = resolve_thresholds(c, cs);  // synthetic: from the generator
  EXPECT_EQ(v.zeta2, c.synth.zeta2);
  EXPECT_EQ(v.zeta1, c.synth.zeta2 - 1);
  EXPECT_EQ(v.max_len, c.horizon);
  c.zeta1 = 5;
  c.zeta2 = 9;
  v = resolve_thresholds(c, cs);
  EXPECT_EQ(v.zeta1, 5);
  EXPECT_EQ(v.zeta2, 9);
  c.zeta1.reset();
  c.zeta2.reset();
  c.dataset = "canonical";
  c.target_viral_ratio = 0.2;
  v = resolve_thresholds(c, cs);
  EXPECT_EQ(v, calibrate_thresholds(cs, 0.2, c.horizon));
}

// ---- sweep -----------------------------------------------------------------

TEST(Sweep, SmokeRunMatchesGoldenFile) {
  auto run = load_run_config(kData + "/smoke_run.json");
  auto reports = window_sweep(run);
  ASSERT_EQ(reports.size(), 4u);  // weibull x {2, 24} then linear x {2, 24}
  EXPECT_EQ(reports[0].family, "weibull");
  EXPECT_EQ(reports[3].family, "linear");
  EXPECT_EQ(reports[1].window_hours, 24.0);
  for (const auto& r : reports) expect_sane(r);
  EXPECT_GE(reports[1].accuracy, reports[0].accuracy);  // more observation does not hurt on oracle data

  std::ostringstream out;
  write_report_csv(reports, out);
  EXPECT_EQ(out.str(), slurp(kData + "/golden_smoke.csv"));

  std::ostringstream again;
  write_report_csv(window_sweep(run), again);
  EXPECT_EQ(again.str(), out.str());
}

TEST(RunConfig, ShippedConfigsLoad) {
  const std::filesystem::path dir = std::filesystem::path(VEDSA_TEST_DATA) / ".." / ".." / "configs";
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".json") continue;
    RunConfig r = load_run_config(e.path().string());
    EXPECT_NO_THROW(r.validate()) << e.path();
    ++n;
  }
  EXPECT_GE(n, 4u);
}
