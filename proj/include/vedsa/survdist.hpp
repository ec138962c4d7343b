#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "vedsa/error.hpp"

namespace vedsa {

enum class DistFamily { Exponential, Rayleigh, Weibull };

inline constexpr std::array<DistFamily, 3> kAllFamilies{DistFamily::Exponential, DistFamily::Rayleigh,
                                                        DistFamily::Weibull};

inline const char* to_string(DistFamily f) {
  switch (f) {
    case DistFamily::Exponential: return "exponential";
    case DistFamily::Rayleigh: return "rayleigh";
    case DistFamily::Weibull: return "weibull";
  }
  return "?";
}

inline DistFamily family_from_string(const std::string& s) {
  if (s == "exponential") return DistFamily::Exponential;
  if (s == "rayleigh") return DistFamily::Rayleigh;
  if (s == "weibull") return DistFamily::Weibull;
  throw ConfigError("unknown distribution family '" + s + "'");
}

/// Number of free parameters per family (width of the model's output head).
inline std::size_t param_count(DistFamily f) { return f == DistFamily::Weibull ? 2 : 1; }

/// Parameter set for one family. Exponential uses `lambda` (rate), Rayleigh
/// `alpha`, Weibull `kappa` (shape) and `lambda` (scale). Unused fields stay 0.
struct DistParams {
  double lambda = 0.0;
  double alpha = 0.0;
  double kappa = 0.0;

  static DistParams exponential(double rate) { return {rate, 0.0, 0.0}; }
  static DistParams rayleigh(double alpha) { return {0.0, alpha, 0.0}; }
  static DistParams weibull(double kappa, double scale) { return {scale, 0.0, kappa}; }

  bool operator==(const DistParams&) const = default;
};

inline bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

inline void validate(DistFamily f, const DistParams& p) {
  bool ok = false;
  switch (f) {
    case DistFamily::Exponential: ok = positive_finite(p.lambda); break;
    case DistFamily::Rayleigh: ok = positive_finite(p.alpha); break;
    case DistFamily::Weibull: ok = positive_finite(p.lambda) && positive_finite(p.kappa); break;
  }
  if (!ok) throw DomainError(std::string("invalid ") + to_string(f) + " parameters");
}

/// Head-order vector: Exponential [lambda], Rayleigh [alpha], Weibull [kappa, lambda].
inline DistParams params_from_vector(DistFamily f, std::span<const double> v) {
  if (v.size() != param_count(f)) throw StructuralError("parameter vector width mismatch");
  switch (f) {
    case DistFamily::Exponential: return DistParams::exponential(v[0]);
    case DistFamily::Rayleigh: return DistParams::rayleigh(v[0]);
    case DistFamily::Weibull: return DistParams::weibull(v[0], v[1]);
  }
  return {};
}

inline std::vector<double> params_to_vector(DistFamily f, const DistParams& p) {
  switch (f) {
    case DistFamily::Exponential: return {p.lambda};
    case DistFamily::Rayleigh: return {p.alpha};
    case DistFamily::Weibull: return {p.kappa, p.lambda};
  }
  return {};
}

inline void check_time(double t) {
  if (!(t >= 0.0) || std::isnan(t)) throw DomainError("time must be nonnegative");
}

inline double hazard(DistFamily f, const DistParams& p, double t) {
  validate(f, p);
  check_time(t);
  switch (f) {
    case DistFamily::Exponential: return p.lambda;
    case DistFamily::Rayleigh: return p.alpha * t;
    case DistFamily::Weibull:
      if (t == 0.0 && p.kappa < 1.0)
        throw DomainError("Weibull hazard is singular at t=0 for kappa<1");
      return (p.kappa / p.lambda) * std::pow(t / p.lambda, p.kappa - 1.0);
  }
  return 0.0;
}

/// Lambda(t) = -ln S(t).
inline double cumulative_hazard(DistFamily f, const DistParams& p, double t) {
  validate(f, p);
  check_time(t);
  switch (f) {
    case DistFamily::Exponential: return p.lambda * t;
    case DistFamily::Rayleigh: return 0.5 * p.alpha * t * t;
    case DistFamily::Weibull: return std::pow(t / p.lambda, p.kappa);
  }
  return 0.0;
}

inline double survival(DistFamily f, const DistParams& p, double t) {
  return std::exp(-cumulative_hazard(f, p, t));
}

inline double cdf(DistFamily f, const DistParams& p, double t) {
  return -std::expm1(-cumulative_hazard(f, p, t));
}

// Minimum time used where the Weibull density is singular at the origin.
inline constexpr double kMinHazardTime = 1e-9;

/// f(t) = h(t) * S(t).
inline double pdf(DistFamily f, const DistParams& p, double t) {
  validate(f, p);
  check_time(t);
  const double tc = (f == DistFamily::Weibull && p.kappa < 1.0) ? std::max(t, kMinHazardTime) : t;
  return hazard(f, p, tc) * survival(f, p, t);
}

/// Integrated hazard Lambda(t1) - Lambda(t0) of a single bin.
inline double hazard_increment(DistFamily f, const DistParams& p, double t0, double t1) {
  if (!(t1 >= t0)) throw DomainError("bin end precedes bin start");
  return cumulative_hazard(f, p, t1) - cumulative_hazard(f, p, t0);
}

/// S(1..t) = exp(-prefix sums of the per-bin hazards).
inline std::vector<double> discrete_survival(std::span<const double> increments) {
  std::vector<double> s(increments.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < increments.size(); ++k) {
    if (!(increments[k] >= 0.0)) throw DomainError("hazard increments must be nonnegative");
    acc += increments[k];
    s[k] = std::exp(-acc);
  }
  return s;
}

/// Right-continuous product-limit step function.
struct StepCurve {
  std::vector<double> times;     // distinct event times, ascending
  std::vector<double> survival;  // S just after each time

  double at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin()) - 1];
  }
};

/// Kaplan-Meier estimate. `censored[i]` marks observation i as right-censored.
inline StepCurve kaplan_meier(std::span<const double> times, std::span<const std::uint8_t> censored) {
  if (times.empty()) throw DomainError("Kaplan-Meier needs at least one observation");
  if (times.size() != censored.size()) throw StructuralError("times and censoring flags differ in length");
  std::vector<std::size_t> idx(times.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (double t : times)
    if (!(t >= 0.0)) throw DomainError("Kaplan-Meier times must be nonnegative");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  StepCurve curve;
  double s = 1.0;
  std::size_t at_risk = times.size();
  for (std::size_t k = 0; k < idx.size();) {
    const double t = times[idx[k]];
    std::size_t deaths = 0, leaving = 0;
    while (k < idx.size() && times[idx[k]] == t) {
      if (!censored[idx[k]]) ++deaths;
      ++leaving;
      ++k;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.survival.push_back(s);
    }
    at_risk -= leaving;
  }
  return curve;
}

}  // namespace vedsa
