#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "vedsa/core.hpp"
#include "vedsa/rng.hpp"
#include "vedsa/survdist.hpp"

namespace vedsa {

struct SynthClassSpec {
  DistParams params;
  double amplitude = 0.0;  // A in the intensity A * h(t)
  std::size_t count = 0;
};

/// Synthetic cascades from an inhomogeneous Poisson process with intensity
/// A * h(t; family, params) on [0, horizon], plus a source event at t = 0.
struct SynthSpec {
  DistFamily family = DistFamily::Weibull;
  SynthClassSpec viral{DistParams::weibull(0.8, 12.0), 400.0, 250};
  SynthClassSpec nonviral{DistParams::weibull(0.8, 12.0), 25.0, 250};
  double horizon = 48.0;
  double bin_length = 1.0;
  std::uint64_t seed = 7;
  std::int64_t zeta2 = 100;
  std::size_t max_retries = 100;

  double expected_count(const SynthClassSpec& c) const {
    return 1.0 + c.amplitude * cumulative_hazard(family, c.params, horizon);
  }

  ViralityConfig virality() const {
    // zeta1 = zeta2 - 1 leaves no intermediate band on integer counts.
    return {std::max<std::int64_t>(1, zeta2 - 1), zeta2, static_cast<std::size_t>(std::llround(horizon / bin_length))};
  }

  void validate() const {
    validate_class(viral, "viral");
    validate_class(nonviral, "nonviral");
    if (!(horizon > 0.0) || !(bin_length > 0.0)) throw ConfigError("synth: horizon and bin_length must be positive");
    if (zeta2 < 2) throw ConfigError("synth: zeta2 must be >= 2");
    const double ev = expected_count(viral), en = expected_count(nonviral);
    if (!(ev > static_cast<double>(zeta2) && static_cast<double>(zeta2) > en))
      throw ConfigError("synth: expected counts must satisfy E[n_viral] > zeta2 > E[n_nonviral] (got " +
                        std::to_string(ev) + ", " + std::to_string(zeta2) + ", " + std::to_string(en) + ")");
  }

 private:
  void validate_class(const SynthClassSpec& c, const char* name) const {
    vedsa::validate(family, c.params);
    if (!(c.amplitude > 0.0) || !std::isfinite(c.amplitude))
      throw ConfigError(std::string("synth: ") + name + " amplitude must be positive");
  }
};

inline void to_json(nlohmann::json& j, const DistParams& p) {
  j = {{"lambda", p.lambda}, {"alpha", p.alpha}, {"kappa", p.kappa}};
}
inline void from_json(const nlohmann::json& j, DistParams& p) {
  p.lambda = j.value("lambda", 0.0);
  p.alpha = j.value("alpha", 0.0);
  p.kappa = j.value("kappa", 0.0);
}
inline void to_json(nlohmann::json& j, const SynthClassSpec& c) {
  j = {{"params", c.params}, {"amplitude", c.amplitude}, {"count", c.count}};
}
inline void from_json(const nlohmann::json& j, SynthClassSpec& c) {
  c.params = j.at("params").get<DistParams>();
  c.amplitude = j.at("amplitude").get<double>();
  c.count = j.at("count").get<std::size_t>();
}
inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"family", to_string(s.family)}, {"viral", s.viral},   {"nonviral", s.nonviral},
       {"horizon", s.horizon},          {"bin_length", s.bin_length}, {"seed", s.seed},
       {"zeta2", s.zeta2},              {"max_retries", s.max_retries}};
}
inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  SynthSpec d;
  s.family = family_from_string(j.value("family", std::string(to_string(d.family))));
  s.viral = j.contains("viral") ? j.at("viral").get<SynthClassSpec>() : d.viral;
  s.nonviral = j.contains("nonviral") ? j.at("nonviral").get<SynthClassSpec>() : d.nonviral;
  s.horizon = j.value("horizon", d.horizon);
  s.bin_length = j.value("bin_length", d.bin_length);
  s.seed = j.value("seed", d.seed);
  s.zeta2 = j.value("zeta2", d.zeta2);
  s.max_retries = j.value("max_retries", d.max_retries);
}

/// Event times of A * h(t) on [0, horizon], source event first. Uses thinning
/// against a constant dominating rate; Weibull with kappa < 1 (hazard
/// unbounded at the origin) is sampled by inverting the cumulative intensity.
inline Cascade gen_cascade(DistFamily family, const SynthClassSpec& cls, double horizon, Rng& rng,
                           std::string id = {}) {
  validate(family, cls.params);
  if (!(cls.amplitude >= 0.0)) throw ConfigError("synth: amplitude must be nonnegative");
  Cascade c{std::move(id), {0.0}};
  if (cls.amplitude == 0.0) return c;
  const DistParams& p = cls.params;

  if (family == DistFamily::Weibull && p.kappa < 1.0) {
    double e = 0.0;
    for (;;) {
      e += rng.exponential(1.0);
      const double t = p.lambda * std::pow(e / cls.amplitude, 1.0 / p.kappa);
      if (t >= horizon) break;
      c.events.push_back(t);
    }
    return c;
  }

  double sup = 0.0;
  switch (family) {
    case DistFamily::Exponential: sup = p.lambda; break;
    case DistFamily::Rayleigh: sup = p.alpha * horizon; break;
    case DistFamily::Weibull: sup = hazard(family, p, horizon); break;
  }
  const double bound = cls.amplitude * sup;
  if (!std::isfinite(bound) || bound > 1e9) throw ConfigError("synth: dominating rate overflows on the horizon");
  if (bound <= 0.0) return c;
  double t = 0.0;
  for (;;) {
    t += rng.exponential(bound);
    if (t >= horizon) break;
    const double rate = cls.amplitude * hazard(family, p, t);
    if (rng.uniform() * bound < rate) c.events.push_back(t);
  }
  return c;
}

struct SynthRecord {
  Cascade cascade;
  Label true_class = Label::NonViral;
  LabeledCascade labeled;
  DistParams truth;
  double amplitude = 0.0;
};

struct SynthDataset {
  std::vector<SynthRecord> records;
  std::size_t first_draw_disagreements = 0;  // draws whose label missed their class before resampling
};

/// Viral cascades first (ids "v000000", ...), then non-viral ("n000000", ...).
/// Each cascade's stream is seeded from (seed, class, index, attempt).
inline SynthDataset gen_dataset(const SynthSpec& spec) {
  spec.validate();
  const ViralityConfig vc = spec.virality();
  SynthDataset out;
  out.records.reserve(spec.viral.count + spec.nonviral.count);
  for (int cls = 1; cls >= 0; --cls) {
    const SynthClassSpec& cs = cls == 1 ? spec.viral : spec.nonviral;
    const Label want = cls == 1 ? Label::Viral : Label::NonViral;
    for (std::size_t i = 0; i < cs.count; ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%c%06zu", cls == 1 ? 'v' : 'n', i);
      bool ok = false;
      for (std::size_t attempt = 0; attempt <= spec.max_retries; ++attempt) {
        Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(cls) * 0x100000000ULL + i, attempt));
        Cascade c = gen_cascade(spec.family, cs, spec.horizon, rng, buf);
        if (label_cascade(c, vc) != want) {
          if (attempt == 0) ++out.first_draw_disagreements;
          continue;
        }
        SynthRecord r;
        r.labeled = label_and_bin(c, vc, spec.bin_length, spec.horizon);
        r.cascade = std::move(c);
        r.true_class = want;
        r.truth = cs.params;
        r.amplitude = cs.amplitude;
        out.records.push_back(std::move(r));
        ok = true;
        break;
      }
      if (!ok)
        throw DomainError(std::string("synth: could not draw a ") + to_string(want) + " cascade within the retry cap");
    }
  }
  return out;
}

/// Sidecar ground truth, one JSON record per line in dataset order.
inline void write_truth(const SynthDataset& ds, DistFamily family, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (const auto& r : ds.records) {
    nlohmann::json j = {{"id", r.cascade.id},
                        {"class", to_string(r.true_class)},
                        {"family", to_string(family)},
                        {"params", r.truth},
                        {"amplitude", r.amplitude}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace vedsa
