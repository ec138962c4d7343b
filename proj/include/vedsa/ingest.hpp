#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vedsa/core.hpp"
#include "vedsa/error.hpp"
#include "vedsa/rng.hpp"

namespace vedsa {

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\"'";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Splits on any of `delims`, collapsing runs when `collapse` is set.
inline std::vector<std::string_view> split(std::string_view s, std::string_view delims, bool collapse) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || delims.find(s[i]) != std::string_view::npos) {
      auto tok = trim(s.substr(start, i - start));
      if (!(collapse && tok.empty())) out.push_back(tok);
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> to_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Epoch seconds, or "YYYY-MM-DD[T ]HH:MM:SS" read as UTC.
inline std::optional<double> parse_timestamp(std::string_view s) {
  s = trim(s);
  if (auto v = to_double(s)) return v;
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':')
    return std::nullopt;
  auto y = to_int(s.substr(0, 4)), mo = to_int(s.substr(5, 2)), d = to_int(s.substr(8, 2));
  auto h = to_int(s.substr(11, 2)), mi = to_int(s.substr(14, 2)), se = to_int(s.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !se || *mo < 1 || *mo > 12 || *d < 1 || *d > 31) return std::nullopt;
  const auto days = days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d));
  return static_cast<double>(days * 86400 + *h * 3600 + *mi * 60 + *se);
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// Numeric ids in numeric order, everything else lexicographic after them.
inline bool id_less(const std::string& a, const std::string& b) {
  const bool da = all_digits(a), db = all_digits(b);
  if (da != db) return da;
  if (da && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ParseResult {
  std::vector<Cascade> cascades;
  std::vector<ParseError> errors;  // recoverable: the offending record was skipped
};

inline constexpr double kSecondsPerHour = 3600.0;
inline constexpr double kTwitterTrackingHours = 168.0;

/// SNAP seismic layout: a directory (or its index.csv) holding
///   index.csv  tweet_id,post_time_day,start_ind,end_ind   (1-based, inclusive rows of data.csv)
///   data.csv   relative_time_second,number_of_followers
/// Follower counts are ignored; retweets after 168 hours are dropped.
inline ParseResult parse_twitter(const std::string& path) {
  namespace fs = std::filesystem;
  fs::path dir = fs::is_directory(path) ? fs::path(path) : fs::path(path).parent_path();
  const std::string index_path = (dir / "index.csv").string();
  const std::string data_path = (dir / "data.csv").string();
  if (!fs::exists(index_path) || !fs::exists(data_path))
    throw IoError("twitter corpus needs index.csv and data.csv under '" + dir.string() + "'");

  ParseResult out;
  std::vector<double> seconds;
  std::vector<std::size_t> data_line;  // source line of each data row, for diagnostics
  {
    auto in = detail::open_input(data_path);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      auto f = detail::split(line, ",", false);
      if (f.empty() || (f.size() == 1 && f[0].empty())) continue;
      auto t = detail::to_double(f[0]);
      if (!t) {
        if (ln == 1) continue;  // header
        // Keep the row so indices stay aligned; flag it as unusable.
        seconds.push_back(std::nan(""));
      } else {
        seconds.push_back(*t);
      }
      data_line.push_back(ln);
    }
  }

  auto in = detail::open_input(index_path);
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    auto f = detail::split(line, ",", false);
    if (f.empty() || (f.size() == 1 && f[0].empty())) continue;
    auto start = f.size() >= 4 ? detail::to_int(f[2]) : std::nullopt;
    auto end = f.size() >= 4 ? detail::to_int(f[3]) : std::nullopt;
    if (!start || !end) {
      if (ln == 1) continue;  // header
      out.errors.emplace_back(index_path, ln, "expected tweet_id,post_time_day,start_ind,end_ind");
      continue;
    }
    if (*start < 1 || *end < *start || static_cast<std::size_t>(*end) > seconds.size()) {
      out.errors.emplace_back(index_path, ln, "row range outside data.csv");
      continue;
    }
    std::vector<double> hours;
    bool bad = false;
    for (auto k = static_cast<std::size_t>(*start - 1); k < static_cast<std::size_t>(*end); ++k) {
      if (std::isnan(seconds[k])) {
        out.errors.emplace_back(data_path, data_line[k], "unparseable retweet time");
        bad = true;
        break;
      }
      hours.push_back(seconds[k] / kSecondsPerHour);
    }
    if (bad) continue;
    Cascade c = make_cascade(std::string(f[0]), std::move(hours));
    std::erase_if(c.events, [](double t) { return t > kTwitterTrackingHours; });
    out.cascades.push_back(std::move(c));
  }
  return out;
}

/// Digg votes: rows of vote_date(epoch s),voter_id,story_id, optionally quoted.
/// Rows may come in any order; cascades are emitted in story-id order.
inline ParseResult parse_digg(const std::string& path) {
  auto in = detail::open_input(path);
  ParseResult out;
  std::map<std::string, std::vector<double>, decltype(&detail::id_less)> stories(&detail::id_less);
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    auto f = detail::split(line, ",\t", false);
    if (f.empty() || (f.size() == 1 && f[0].empty())) continue;
    auto t = f.size() >= 3 ? detail::to_double(f[0]) : std::nullopt;
    if (!t || f[2].empty()) {
      if (ln == 1) continue;  // header
      out.errors.emplace_back(path, ln, "expected vote_date,voter_id,story_id");
      continue;
    }
    stories[std::string(f[2])].push_back(*t / kSecondsPerHour);
  }
  for (auto& [id, hours] : stories) out.cascades.push_back(make_cascade(id, std::move(hours)));
  return out;
}

/// Weibo repost chains: a post line
///   post_id  root_uid  post_time  repost_count
/// followed by repost_count lines
///   uid  repost_time  [ignored...]
/// Whitespace separated; times are epoch seconds or YYYY-MM-DD[T ]HH:MM:SS.
/// When sample_size is set, a seeded uniform sample of that many posts is
/// kept (in file order).
inline ParseResult parse_weibo(const std::string& path, std::optional<std::size_t> sample_size = std::nullopt,
                               std::uint64_t seed = 0) {
  auto in = detail::open_input(path);
  ParseResult out;

  auto read_time = [](const std::vector<std::string_view>& f, std::size_t at) -> std::optional<double> {
    if (at >= f.size()) return std::nullopt;
    if (at + 1 < f.size() && f[at].size() == 10 && f[at + 1].size() == 8) {
      std::string joined = std::string(f[at]) + " " + std::string(f[at + 1]);
      if (auto v = detail::parse_timestamp(joined)) return v;
    }
    return detail::parse_timestamp(f[at]);
  };

  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    auto f = detail::split(line, " \t", true);
    if (f.empty()) continue;
    const std::size_t post_line = ln;
    auto post_time = read_time(f, 2);
    auto count = f.empty() ? std::nullopt : detail::to_int(f.back());
    if (f.size() < 4 || !post_time || !count || *count < 0) {
      out.errors.emplace_back(path, ln, "expected post_id root_uid post_time repost_count");
      continue;
    }
    std::string post_id(f[0]);  // f views `line`, which the repost loop overwrites
    std::vector<double> hours{*post_time / kSecondsPerHour};
    bool bad = false;
    for (std::int64_t k = 0; k < *count; ++k) {
      if (!std::getline(in, line)) {
        out.errors.emplace_back(path, post_line, "file ends inside a repost list");
        bad = true;
        break;
      }
      ++ln;
      auto r = detail::split(line, " \t", true);
      auto t = read_time(r, 1);
      if (!t) {
        out.errors.emplace_back(path, ln, "expected uid repost_time");
        bad = true;
        continue;  // consume the rest of this post's block
      }
      hours.push_back(*t / kSecondsPerHour);
    }
    if (bad) continue;
    out.cascades.push_back(make_cascade(std::move(post_id), std::move(hours)));
  }

  if (sample_size && *sample_size < out.cascades.size()) {
    std::vector<std::size_t> idx(out.cascades.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, 0x776569626fULL));
    rng.shuffle(idx);
    idx.resize(*sample_size);
    std::sort(idx.begin(), idx.end());
    std::vector<Cascade> kept;
    kept.reserve(idx.size());
    for (std::size_t i : idx) kept.push_back(std::move(out.cascades[i]));
    out.cascades = std::move(kept);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical interchange: a version header line, then one JSON object per
// cascade: {"id": "...", "events": [hours...]}.

inline constexpr std::string_view kCanonicalHeader = "#vedsa-cascades v1";

inline void write_canonical(const std::vector<Cascade>& cascades, std::ostream& out) {
  out << kCanonicalHeader << '\n';
  for (const auto& c : cascades) out << nlohmann::json{{"id", c.id}, {"events", c.events}}.dump() << '\n';
}

inline void write_canonical(const std::vector<Cascade>& cascades, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_canonical(cascades, out);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::vector<Cascade> read_canonical(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing canonical header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCanonicalHeader) {
    if (line.rfind("#vedsa-cascades", 0) == 0)
      throw ParseError(source, 1, "unsupported canonical version '" + line + "'");
    throw ParseError(source, 1, "not a canonical cascade file");
  }
  std::vector<Cascade> out;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Cascade c{j.at("id").get<std::string>(), j.at("events").get<std::vector<double>>()};
      validate(c);
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, ln, e.what());
    } catch (const DomainError& e) {
      throw ParseError(source, ln, e.what());
    }
  }
  return out;
}

inline std::vector<Cascade> read_canonical(const std::string& path) {
  auto in = detail::open_input(path);
  return read_canonical(in, path);
}

// ---------------------------------------------------------------------------

enum class DatasetName { Twitter, Digg, Weibo, Canonical, Synthetic };

inline const char* to_string(DatasetName d) {
  switch (d) {
    case DatasetName::Twitter: return "twitter";
    case DatasetName::Digg: return "digg";
    case DatasetName::Weibo: return "weibo";
    case DatasetName::Canonical: return "canonical";
    case DatasetName::Synthetic: return "synthetic";
  }
  return "?";
}

inline DatasetName dataset_from_string(const std::string& s) {
  for (auto d : {DatasetName::Twitter, DatasetName::Digg, DatasetName::Weibo, DatasetName::Canonical,
                 DatasetName::Synthetic})
    if (s == to_string(d)) return d;
  throw ConfigError("unknown dataset '" + s + "'");
}

/// reshare_count counts every event, source included (one row per vote/retweet).
struct DatasetManifest {
  DatasetName name = DatasetName::Canonical;
  std::string path;
  std::size_t cascade_count = 0;
  std::size_t reshare_count = 0;
};

inline DatasetManifest make_manifest(DatasetName name, std::string path, const std::vector<Cascade>& cs) {
  DatasetManifest m{name, std::move(path), cs.size(), 0};
  for (const auto& c : cs) m.reshare_count += c.n();
  if (m.cascade_count < 1) throw DomainError("dataset has no cascades");
  return m;
}

/// Target viral ratios among non-intermediate cascades for the three corpora.
inline double default_viral_ratio(DatasetName d) {
  switch (d) {
    case DatasetName::Twitter: return 0.0833;
    case DatasetName::Digg: return 0.0194;
    case DatasetName::Weibo: return 0.00972;
    default: return 0.5;
  }
}

/// Smallest zeta2 whose viral share among non-intermediate cascades is at most
/// `target_ratio`, with zeta1 = zeta2 / 2.
inline ViralityConfig calibrate_thresholds(const std::vector<Cascade>& cascades, double target_ratio,
                                           std::size_t max_len) {
  if (cascades.empty()) throw ConfigError("cannot calibrate thresholds on an empty corpus");
  if (!(target_ratio > 0.0 && target_ratio < 1.0)) throw ConfigError("target viral ratio must lie in (0, 1)");
  std::vector<std::int64_t> n;
  n.reserve(cascades.size());
  for (const auto& c : cascades) n.push_back(static_cast<std::int64_t>(c.n()));
  std::sort(n.begin(), n.end());
  const std::int64_t top = n.back();
  for (std::int64_t z2 = 2; z2 <= top; ++z2) {
    const std::int64_t z1 = std::max<std::int64_t>(1, z2 / 2);
    const auto viral = static_cast<double>(n.end() - std::lower_bound(n.begin(), n.end(), z2));
    const auto nonviral = static_cast<double>(std::upper_bound(n.begin(), n.end(), z1) - n.begin());
    if (viral + nonviral > 0.0 && viral / (viral + nonviral) <= target_ratio) return {z1, z2, max_len};
  }
  return {std::max<std::int64_t>(1, top / 2), top, max_len};
}

enum class Balance { None, Undersample, ClassWeight };

inline const char* to_string(Balance b) {
  switch (b) {
    case Balance::None: return "none";
    case Balance::Undersample: return "undersample";
    case Balance::ClassWeight: return "class_weight";
  }
  return "?";
}

inline Balance balance_from_string(const std::string& s) {
  for (auto b : {Balance::None, Balance::Undersample, Balance::ClassWeight})
    if (s == to_string(b)) return b;
  throw ConfigError("unknown balance mode '" + s + "'");
}

struct SplitSpec {
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  Balance balance = Balance::Undersample;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  }
};

struct DatasetSplit {
  std::vector<LabeledCascade> train;
  std::vector<LabeledCascade> test;
  double viral_ratio = 0.0;  // before balancing
  std::size_t viral = 0;
  std::size_t nonviral = 0;
  std::size_t intermediate = 0;
};

/// Drops intermediate cascades, labels and bins the rest over `window` hours,
/// optionally undersamples the majority class, then splits each class by
/// `train_fraction`. Output order follows input order within each partition.
inline DatasetSplit build_dataset(const std::vector<Cascade>& cascades, const ViralityConfig& cfg,
                                  const SplitSpec& split, double bin_length, double window) {
  cfg.validate();
  split.validate();
  DatasetSplit out;
  std::vector<LabeledCascade> labeled;
  std::vector<std::size_t> by_class[2];
  for (const auto& c : cascades) {
    const Label l = label_cascade(c, cfg);
    if (l == Label::Intermediate) {
      ++out.intermediate;
      continue;
    }
    by_class[l == Label::Viral ? 1 : 0].push_back(labeled.size());
    labeled.push_back(label_and_bin(c, cfg, bin_length, window));
  }
  out.nonviral = by_class[0].size();
  out.viral = by_class[1].size();
  if (out.viral == 0 || out.nonviral == 0)
    throw ConfigError("a class is empty after filtering (viral " + std::to_string(out.viral) + ", non-viral " +
                      std::to_string(out.nonviral) + ")");
  out.viral_ratio = static_cast<double>(out.viral) / static_cast<double>(out.viral + out.nonviral);

  Rng rng(derive_seed(split.seed, 0x73706c6974ULL));
  if (split.balance == Balance::Undersample) {
    auto& major = by_class[0].size() > by_class[1].size() ? by_class[0] : by_class[1];
    const std::size_t keep = std::min(by_class[0].size(), by_class[1].size());
    rng.shuffle(major);
    major.resize(keep);
    std::sort(major.begin(), major.end());
  }

  std::vector<std::uint8_t> in_train(labeled.size(), 0), used(labeled.size(), 0);
  for (auto& members : by_class) {
    std::vector<std::size_t> idx = members;
    rng.shuffle(idx);
    auto n_train = static_cast<std::size_t>(std::llround(split.train_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      used[idx[k]] = 1;
      in_train[idx[k]] = k < n_train ? 1 : 0;
    }
  }
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (!used[i]) continue;
    (in_train[i] ? out.train : out.test).push_back(std::move(labeled[i]));
  }
  return out;
}

}  // namespace vedsa
