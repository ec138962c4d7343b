#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "vedsa/ingest.hpp"

using namespace vedsa;
namespace fs = std::filesystem;

namespace {

const std::string kData = VEDSA_TEST_DATA;

void expect_events(const Cascade& c, const std::string& id, const std::vector<double>& hours) {
  SCOPED_TRACE(id);
  EXPECT_EQ(c.id, id);
  ASSERT_EQ(c.events.size(), hours.size());
  for (std::size_t k = 0; k < hours.size(); ++k) EXPECT_NEAR(c.events[k], hours[k], 1e-9) << "event " << k;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("vedsa_ingest_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& body = {}) const {
    auto p = (path / name).string();
    if (!body.empty()) std::ofstream(p, std::ios::binary) << body;
    return p;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Cascade with_n(const std::string& id, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = 0.25 * static_cast<double>(k);
  return {id, t};
}

}  // namespace

// ---- Twitter ---------------------------------------------------------------

TEST(Twitter, FixtureGolden) {
  auto r = parse_twitter(kData + "/twitter");
  EXPECT_TRUE(r.errors.empty());
  ASSERT_EQ(r.cascades.size(), 10u);
  expect_events(r.cascades[0], "t01", {0, 1.0 / 60});
  expect_events(r.cascades[1], "t02", {0, 30.0 / 3600, 90.0 / 3600, 1});
  expect_events(r.cascades[2], "t03", {0});  // 700000 s is past the week
  expect_events(r.cascades[3], "t04", {0, 168});
  expect_events(r.cascades[4], "t05", {0});
  expect_events(r.cascades[6], "t07", {0, 2, 4});
  expect_events(r.cascades[7], "t08", {0, 0.5, 0.5, 1.5});
  expect_events(r.cascades[8], "t09", {0, 24, 48});
  expect_events(r.cascades[9], "t10", {0, 1.0 / 3600, 2.0 / 3600});
  auto m = make_manifest(DatasetName::Twitter, kData + "/twitter", r.cascades);
  EXPECT_EQ(m.cascade_count, 10u);
  EXPECT_EQ(m.reshare_count, 29u);
}

TEST(Twitter, AcceptsIndexFilePath) {
  auto a = parse_twitter(kData + "/twitter");
  auto b = parse_twitter(kData + "/twitter/index.csv");
  EXPECT_EQ(a.cascades, b.cascades);
}

TEST(Twitter, SixtySecondsIsOneSixtiethHour) {
  TempDir d("tw60");
  d.file("index.csv", "tweet_id,post_time_day,start_ind,end_ind\nx,0.1,1,2\n");
  d.file("data.csv", "relative_time_second,number_of_followers\n0,5\n60,7\n");
  auto r = parse_twitter(d.path.string());
  ASSERT_EQ(r.cascades.size(), 1u);
  EXPECT_EQ(r.cascades[0].events, (std::vector<double>{0.0, 60.0 / 3600.0}));
}

TEST(Twitter, MalformedRowsAreSkippedWithLineNumbers) {
  TempDir d("twbad");
  d.file("index.csv", "tweet_id,post_time_day,start_ind,end_ind\na,0,1,2\nb,0,oops\nc,0,3,9\nd,0,3,4\n");
  d.file("data.csv", "relative_time_second,number_of_followers\n0,1\n10,1\n0,1\nnan?,1\n");
  auto r = parse_twitter(d.path.string());
  ASSERT_EQ(r.cascades.size(), 1u);
  EXPECT_EQ(r.cascades[0].id, "a");
  ASSERT_EQ(r.errors.size(), 3u);
  EXPECT_EQ(r.errors[0].line(), 3u);
  EXPECT_EQ(r.errors[1].line(), 4u);
  EXPECT_EQ(r.errors[2].line(), 5u);  // data.csv row of the bad time
  EXPECT_NE(std::string(r.errors[2].what()).find("data.csv"), std::string::npos);
}

TEST(Twitter, MissingLayoutIsIoError) {
  TempDir d("twnone");
  EXPECT_THROW(parse_twitter(d.path.string()), IoError);
}

// ---- Digg ------------------------------------------------------------------

TEST(Digg, FixtureGolden) {
  auto r = parse_digg(kData + "/digg_votes.csv");
  EXPECT_TRUE(r.errors.empty());
  ASSERT_EQ(r.cascades.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(r.cascades[k].id, std::to_string(k + 1));
  expect_events(r.cascades[0], "1", {0, 1.0 / 60});
  expect_events(r.cascades[1], "2", {0, 0, 1});
  expect_events(r.cascades[2], "3", {0});
  expect_events(r.cascades[3], "4", {0, 1, 2, 3});
  expect_events(r.cascades[5], "6", {0, 0, 0});
  expect_events(r.cascades[6], "7", {0, 24});
  expect_events(r.cascades[9], "10", {0, 0.5, 1});
  EXPECT_EQ(make_manifest(DatasetName::Digg, "", r.cascades).reshare_count, 26u);
}

TEST(Digg, TwoRowStory) {
  TempDir d("digg2");
  auto p = d.file("v.csv", "160,u2,s\n100,u1,s\n");
  auto r = parse_digg(p);
  ASSERT_EQ(r.cascades.size(), 1u);
  expect_events(r.cascades[0], "s", {0, 1.0 / 60});
}

TEST(Digg, RowOrderDoesNotMatter) {
  std::ifstream in(kData + "/digg_votes.csv");
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  const auto base = parse_digg(kData + "/digg_votes.csv").cascades;
  TempDir d("diggshuf");
  std::mt19937 gen(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(rows.begin(), rows.end(), gen);
    std::string body = header + "\n";
    for (auto& r : rows) body += r + "\n";
    auto p = d.file("v" + std::to_string(trial) + ".csv", body);
    EXPECT_EQ(parse_digg(p).cascades, base);
  }
}

TEST(Digg, BadRowIsRecoverable) {
  TempDir d("diggbad");
  auto p = d.file("v.csv", "vote_date,voter_id,story_id\n1,a,s\nxx,b,s\n7201,c,s\n5\n");
  auto r = parse_digg(p);
  ASSERT_EQ(r.cascades.size(), 1u);
  expect_events(r.cascades[0], "s", {0, 2});
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line(), 3u);
  EXPECT_EQ(r.errors[1].line(), 5u);
  EXPECT_EQ(r.errors[0].kind(), ErrorKind::Parse);
}

TEST(Digg, MissingFileIsIoError) { EXPECT_THROW(parse_digg("/nonexistent/votes.csv"), IoError); }

// ---- Weibo -----------------------------------------------------------------

TEST(Weibo, FixtureGolden) {
  auto r = parse_weibo(kData + "/weibo.txt");
  EXPECT_TRUE(r.errors.empty());
  ASSERT_EQ(r.cascades.size(), 10u);
  expect_events(r.cascades[0], "p01", {0, 1.0 / 60, 1});
  expect_events(r.cascades[1], "p02", {0});
  expect_events(r.cascades[2], "p03", {0, 0.5, 1, 2});
  expect_events(r.cascades[3], "p04", {0, 0});
  expect_events(r.cascades[4], "p05", {0, 1, 2});
  expect_events(r.cascades[5], "p06", {0, 24});
  expect_events(r.cascades[6], "p07", {0});
  expect_events(r.cascades[7], "p08", {0, 0.01, 0.02, 0.03});
  expect_events(r.cascades[8], "p09", {0, 5});
  expect_events(r.cascades[9], "p10", {0, 0.25, 0.5});
  EXPECT_EQ(make_manifest(DatasetName::Weibo, "", r.cascades).reshare_count, 25u);
}

TEST(Weibo, SourceOnlyPost) {
  TempDir d("wsrc");
  auto r = parse_weibo(d.file("w.txt", "only u 1000 0\n"));
  ASSERT_EQ(r.cascades.size(), 1u);
  EXPECT_EQ(r.cascades[0].events, std::vector<double>{0.0});
  EXPECT_EQ(r.cascades[0].n(), 1u);
}

TEST(Weibo, SamplingIsSeededAndKeepsFileOrder) {
  auto all = parse_weibo(kData + "/weibo.txt").cascades;
  auto a = parse_weibo(kData + "/weibo.txt", 4, 11).cascades;
  auto b = parse_weibo(kData + "/weibo.txt", 4, 11).cascades;
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  std::size_t pos = 0;
  for (const auto& c : a) {
    auto it = std::find(all.begin() + static_cast<std::ptrdiff_t>(pos), all.end(), c);
    ASSERT_NE(it, all.end());
    pos = static_cast<std::size_t>(it - all.begin()) + 1;
  }
  bool differs = false;
  for (std::uint64_t s = 12; s < 20 && !differs; ++s) differs = parse_weibo(kData + "/weibo.txt", 4, s).cascades != a;
  EXPECT_TRUE(differs);
  EXPECT_EQ(parse_weibo(kData + "/weibo.txt", 50, 1).cascades.size(), 10u);
}

TEST(Weibo, MalformedBlocks) {
  TempDir d("wbad");
  auto p = d.file("w.txt",
                  "a u 100 1\n"
                  "v 160\n"
                  "b u\n"
                  "c u 100 2\n"
                  "v never\n"
                  "w 200\n"
                  "e u 100 3\n"
                  "v 200\n");
  auto r = parse_weibo(p);
  ASSERT_EQ(r.cascades.size(), 1u);
  expect_events(r.cascades[0], "a", {0, 1.0 / 60});
  ASSERT_EQ(r.errors.size(), 3u);
  EXPECT_EQ(r.errors[0].line(), 3u);
  EXPECT_EQ(r.errors[1].line(), 5u);
  EXPECT_EQ(r.errors[2].line(), 7u);
}

// ---- Canonical -------------------------------------------------------------

TEST(Canonical, GoldenThreeCascades) {
  std::vector<Cascade> cs{{"a", {0.0}}, {"b", {0.0, 0.5, 1.25}}, {"c", {0.0, 0.0, 2.0, 168.0}}};
  TempDir d("gold");
  auto p = d.file("out.cascades");
  write_canonical(cs, p);
  EXPECT_EQ(slurp(p), slurp(kData + "/golden_3.cascades"));
  EXPECT_EQ(read_canonical(kData + "/golden_3.cascades"), cs);
}

TEST(Canonical, EmptyListIsHeaderOnly) {
  std::ostringstream out;
  write_canonical({}, out);
  EXPECT_EQ(out.str(), "#vedsa-cascades v1\n");
  std::istringstream in(out.str());
  EXPECT_TRUE(read_canonical(in).empty());
}

TEST(Canonical, RoundTripParsedCorpora) {
  TempDir d("rt");
  for (auto cs : {parse_twitter(kData + "/twitter").cascades, parse_digg(kData + "/digg_votes.csv").cascades,
                  parse_weibo(kData + "/weibo.txt").cascades}) {
    auto p = d.file("x.cascades");
    write_canonical(cs, p);
    EXPECT_EQ(read_canonical(p), cs);  // bitwise, including awkward fractions
  }
}

TEST(Canonical, VersionAndSchemaErrors) {
  auto parse = [](const std::string& body) {
    std::istringstream in(body);
    return read_canonical(in);
  };
  try {
    parse("#vedsa-cascades v2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("id,events\n"), ParseError);
  try {
    parse("#vedsa-cascades v1\n{\"id\":\"a\",\"events\":[0]}\n{\"id\":\"b\",\"events\":[0.5,1]}\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);  // not origin-shifted
  }
  EXPECT_THROW(parse("#vedsa-cascades v1\n{\"id\":\"a\"}\n"), ParseError);
  EXPECT_THROW(read_canonical("/nonexistent/x.cascades"), IoError);
  EXPECT_THROW(write_canonical({}, "/nonexistent/dir/x.cascades"), IoError);
}

// ---- Manifest, calibration, build_dataset ----------------------------------

TEST(Manifest, Invariants) {
  EXPECT_THROW(make_manifest(DatasetName::Digg, "", {}), DomainError);
  auto m = make_manifest(DatasetName::Canonical, "p", {with_n("a", 1), with_n("b", 4)});
  EXPECT_EQ(m.cascade_count, 2u);
  EXPECT_EQ(m.reshare_count, 5u);
  EXPECT_GE(m.reshare_count, m.cascade_count);
  EXPECT_EQ(dataset_from_string("weibo"), DatasetName::Weibo);
  EXPECT_THROW(dataset_from_string("reddit"), ConfigError);
}

TEST(Calibrate, MatchesBruteForce) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Cascade> cs;
    std::geometric_distribution<int> g(0.05);
    for (int k = 0; k < 300; ++k) cs.push_back(with_n("c" + std::to_string(k), 1 + static_cast<std::size_t>(g(gen))));
    const double target = 0.02 + 0.01 * (trial % 10);
    auto cfg = calibrate_thresholds(cs, target, 24);

    std::int64_t expect2 = -1;
    std::int64_t top = 0;
    for (auto& c : cs) top = std::max<std::int64_t>(top, static_cast<std::int64_t>(c.n()));
    for (std::int64_t z2 = 2; z2 <= top && expect2 < 0; ++z2) {
      int v = 0, nv = 0;
      for (auto& c : cs) {
        const auto n = static_cast<std::int64_t>(c.n());
        v += n >= z2;
        nv += n <= std::max<std::int64_t>(1, z2 / 2);
      }
      if (v + nv > 0 && static_cast<double>(v) / (v + nv) <= target) expect2 = z2;
    }
    ASSERT_GT(expect2, 0);
    EXPECT_EQ(cfg.zeta2, expect2);
    EXPECT_EQ(cfg.zeta1, std::max<std::int64_t>(1, expect2 / 2));
    EXPECT_EQ(cfg.max_len, 24u);
  }
  EXPECT_THROW(calibrate_thresholds({}, 0.1, 1), ConfigError);
  EXPECT_THROW(calibrate_thresholds({with_n("a", 3)}, 1.5, 1), ConfigError);
}

namespace {

std::vector<Cascade> mixed_corpus() {
  std::vector<Cascade> cs;
  for (int k = 0; k < 40; ++k) cs.push_back(with_n("n" + std::to_string(k), 1 + k % 3));    // n <= 3
  for (int k = 0; k < 7; ++k) cs.push_back(with_n("m" + std::to_string(k), 5));             // intermediate
  for (int k = 0; k < 12; ++k) cs.push_back(with_n("v" + std::to_string(k), 10 + k));       // viral
  return cs;
}

}  // namespace

TEST(BuildDataset, ExcludesIntermediateAndReportsRatio) {
  ViralityConfig cfg{3, 10, 8};
  SplitSpec split{9, 0.75, Balance::None};
  auto ds = build_dataset(mixed_corpus(), cfg, split, 1.0, 8.0);
  EXPECT_EQ(ds.intermediate, 7u);
  EXPECT_EQ(ds.nonviral, 40u);
  EXPECT_EQ(ds.viral, 12u);
  EXPECT_DOUBLE_EQ(ds.viral_ratio, 12.0 / 52.0);
  EXPECT_EQ(ds.train.size() + ds.test.size(), 52u);
  EXPECT_EQ(ds.train.size(), 30u + 9u);
  for (const auto* part : {&ds.train, &ds.test})
    for (const auto& lc : *part) {
      EXPECT_NE(lc.id[0], 'm');
      EXPECT_EQ(lc.label, lc.id[0] == 'v' ? Label::Viral : Label::NonViral);
      EXPECT_EQ(lc.binned.counts.size(), 8u);
      EXPECT_EQ(lc.sigma.size(), lc.binned.observed_bins);
    }
}

TEST(BuildDataset, UndersamplingBalancesClasses) {
  ViralityConfig cfg{3, 10, 8};
  auto ds = build_dataset(mixed_corpus(), cfg, {4, 0.5, Balance::Undersample}, 1.0, 8.0);
  std::size_t v = 0, nv = 0;
  for (const auto* part : {&ds.train, &ds.test})
    for (const auto& lc : *part) (lc.label == Label::Viral ? v : nv)++;
  EXPECT_EQ(v, 12u);
  EXPECT_EQ(nv, 12u);
  EXPECT_DOUBLE_EQ(ds.viral_ratio, 12.0 / 52.0);  // measured before balancing
}

TEST(BuildDataset, SeedReproducible) {
  ViralityConfig cfg{3, 10, 8};
  auto cs = mixed_corpus();
  for (Balance b : {Balance::None, Balance::Undersample, Balance::ClassWeight}) {
    auto a = build_dataset(cs, cfg, {21, 0.8, b}, 1.0, 8.0);
    auto c = build_dataset(cs, cfg, {21, 0.8, b}, 1.0, 8.0);
    EXPECT_EQ(a.train, c.train);
    EXPECT_EQ(a.test, c.test);
  }
  auto a = build_dataset(cs, cfg, {21, 0.8, Balance::None}, 1.0, 8.0);
  bool differs = false;
  for (std::uint64_t s = 22; s < 30 && !differs; ++s)
    differs = build_dataset(cs, cfg, {s, 0.8, Balance::None}, 1.0, 8.0).test != a.test;
  EXPECT_TRUE(differs);
}

TEST(BuildDataset, EmptyClassIsConfigError) {
  ViralityConfig cfg{3, 10, 8};
  std::vector<Cascade> only_small{with_n("a", 1), with_n("b", 2)};
  EXPECT_THROW(build_dataset(only_small, cfg, {}, 1.0, 8.0), ConfigError);
  std::vector<Cascade> only_mid{with_n("a", 5), with_n("b", 11)};
  EXPECT_THROW(build_dataset(only_mid, cfg, {}, 1.0, 8.0), ConfigError);
  EXPECT_THROW(build_dataset(mixed_corpus(), cfg, {1, 1.0, Balance::None}, 1.0, 8.0), ConfigError);
  EXPECT_THROW(build_dataset(mixed_corpus(), {5, 3, 8}, {}, 1.0, 8.0), ConfigError);
}

TEST(BuildDataset, FixtureCorporaWithCalibratedThresholds) {
  auto cs = parse_weibo(kData + "/weibo.txt").cascades;
  auto cfg = calibrate_thresholds(cs, 0.3, 24);
  auto ds = build_dataset(cs, cfg, {1, 0.5, Balance::None}, 1.0, 24.0);
  EXPECT_LE(ds.viral_ratio, 0.3);
  EXPECT_GT(ds.viral, 0u);
}
