#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vedsa/error.hpp"

namespace vedsa {

/// One information cascade: the source event plus every reshare, as hours
/// since the source. `events.front() == 0` and the sequence is nondecreasing.
struct Cascade {
  std::string id;
  std::vector<double> events;

  std::size_t n() const { return events.size(); }

  bool operator==(const Cascade&) const = default;
};

/// Throws DomainError when `c` breaks the cascade invariants.
inline void validate(const Cascade& c) {
  if (c.events.empty()) throw DomainError("cascade '" + c.id + "' has no events");
  if (c.events.front() != 0.0)
    throw DomainError("cascade '" + c.id + "' is not origin-shifted");
  for (std::size_t i = 1; i < c.events.size(); ++i) {
    if (!(c.events[i] >= c.events[i - 1]))
      throw DomainError("cascade '" + c.id + "' has decreasing or non-finite timestamps");
  }
  if (!std::isfinite(c.events.back()))
    throw DomainError("cascade '" + c.id + "' has non-finite timestamps");
}

/// Sorts raw timestamps (any unit already converted to hours), shifts the
/// earliest to zero and validates.
inline Cascade make_cascade(std::string id, std::vector<double> hours) {
  if (hours.empty()) throw DomainError("cascade '" + id + "' has no events");
  std::sort(hours.begin(), hours.end());
  const double origin = hours.front();
  for (double& t : hours) t -= origin;
  Cascade c{std::move(id), std::move(hours)};
  validate(c);
  return c;
}

struct BinnedCascade {
  std::vector<std::int64_t> counts;
  double bin_length = 1.0;
  std::size_t observed_bins = 0;

  bool operator==(const BinnedCascade&) const = default;

  /// The first `r` bins, i.e. the binned form of the cascade censored at r*bin_length.
  BinnedCascade prefix(std::size_t r) const {
    if (r > counts.size()) throw DomainError("prefix longer than binned cascade");
    return {std::vector<std::int64_t>(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(r)),
            bin_length, r};
  }
};

struct ViralityConfig {
  std::int64_t zeta1 = 1;  // n <= zeta1: non-viral
  std::int64_t zeta2 = 1;  // n >= zeta2: viral
  std::size_t max_len = 1;

  void validate() const {
    if (!(zeta1 > 0 && zeta1 <= zeta2))
      throw ConfigError("virality thresholds must satisfy 0 < zeta1 <= zeta2");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
  }

  bool operator==(const ViralityConfig&) const = default;
};

enum class Label { NonViral = 0, Viral = 1, Intermediate = 2 };

inline const char* to_string(Label l) {
  switch (l) {
    case Label::NonViral: return "nonviral";
    case Label::Viral: return "viral";
    case Label::Intermediate: return "intermediate";
  }
  return "?";
}

struct LabeledCascade {
  std::string id;
  BinnedCascade binned;
  Label label = Label::NonViral;
  std::vector<std::uint8_t> sigma;
  // First bin whose cumulative count reaches zeta2. May lie past the end of
  // `sigma` when the cascade turns viral after the binned horizon.
  std::optional<std::size_t> viral_time;

  bool operator==(const LabeledCascade&) const = default;
};

namespace detail {

// Number of bins `span` covers; throws unless span is a positive multiple of bin_length.
inline std::size_t bin_count(double bin_length, double span) {
  if (!(bin_length > 0.0) || !std::isfinite(bin_length))
    throw ConfigError("bin_length must be positive");
  if (!(span > 0.0) || !std::isfinite(span)) throw ConfigError("span must be positive");
  const double ratio = span / bin_length;
  const double k = std::round(ratio);
  if (k < 1.0 || std::abs(ratio - k) > 1e-9 * std::max(1.0, k))
    throw ConfigError("span must be a positive multiple of bin_length");
  return static_cast<std::size_t>(k);
}

// Bin j holds [j*L, (j+1)*L), with the boundaries evaluated as the products j*L
// so that censoring at k*L and binning agree exactly.
inline std::size_t bin_index(double t, double bin_length) {
  auto j = static_cast<std::size_t>(std::floor(t / bin_length));
  while (static_cast<double>(j + 1) * bin_length <= t) ++j;
  while (j > 0 && static_cast<double>(j) * bin_length > t) --j;
  return j;
}

}  // namespace detail

/// Counts events per bin of length `bin_length` over [0, span).
inline BinnedCascade bin_cascade(const Cascade& c, double bin_length, double span) {
  const std::size_t bins = detail::bin_count(bin_length, span);
  BinnedCascade out{std::vector<std::int64_t>(bins, 0), bin_length, bins};
  for (double t : c.events) {
    if (t < 0.0) continue;
    const std::size_t j = detail::bin_index(t, bin_length);
    if (j >= bins) break;  // events are sorted
    ++out.counts[j];
  }
  return out;
}

inline Label label_cascade(std::int64_t n, const ViralityConfig& cfg) {
  if (n <= cfg.zeta1) return Label::NonViral;
  if (n >= cfg.zeta2) return Label::Viral;
  return Label::Intermediate;
}

inline Label label_cascade(const Cascade& c, const ViralityConfig& cfg) {
  return label_cascade(static_cast<std::int64_t>(c.n()), cfg);
}

struct ViralState {
  std::vector<std::uint8_t> sigma;
  std::optional<std::size_t> viral_time;
};

/// Per-bin viral-state indicator over `num_bins` bins. The viral time is the
/// bin holding the zeta2-th event of the full cascade.
inline ViralState viral_state_sequence(const Cascade& c, const ViralityConfig& cfg,
                                       double bin_length, std::size_t num_bins) {
  const Label label = label_cascade(c, cfg);
  if (label == Label::Intermediate)
    throw DomainError("cascade '" + c.id + "' is intermediate; no viral state is defined");
  if (!(bin_length > 0.0)) throw ConfigError("bin_length must be positive");
  ViralState out{std::vector<std::uint8_t>(num_bins, 0), std::nullopt};
  if (label == Label::NonViral) return out;
  const double crossing = c.events[static_cast<std::size_t>(cfg.zeta2 - 1)];
  const std::size_t tv = detail::bin_index(crossing, bin_length);
  out.viral_time = tv;
  for (std::size_t j = tv; j < num_bins; ++j) out.sigma[j] = 1;
  return out;
}

/// Same scan expressed over bin counts: first bin whose running total reaches zeta2.
inline std::optional<std::size_t> first_crossing(const std::vector<std::int64_t>& counts,
                                                 std::int64_t zeta2) {
  std::int64_t cum = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    cum += counts[j];
    if (cum >= zeta2) return j;
  }
  return std::nullopt;
}

/// Right-censors a cascade at `tau` hours: keeps events with t < tau.
inline Cascade censor(const Cascade& c, double tau) {
  if (!(tau > 0.0)) throw DomainError("censoring time must be positive");
  Cascade out{c.id, {}};
  auto end = std::lower_bound(c.events.begin(), c.events.end(), tau);
  out.events.assign(c.events.begin(), end);
  return out;
}

/// Bins, labels and computes sigma for one non-intermediate cascade.
inline LabeledCascade label_and_bin(const Cascade& c, const ViralityConfig& cfg, double bin_length,
                                    double span) {
  LabeledCascade out;
  out.id = c.id;
  out.label = label_cascade(c, cfg);
  out.binned = bin_cascade(c, bin_length, span);
  ViralState vs = viral_state_sequence(c, cfg, bin_length, out.binned.observed_bins);
  out.sigma = std::move(vs.sigma);
  out.viral_time = vs.viral_time;
  return out;
}

}  // namespace vedsa
