#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vedsa/rng.hpp"
#include "vedsa/tensorkit/tape.hpp"

namespace vedsa::tk {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // entries sitting on a ReLU/pooling kink at every step tried
  std::string worst;        // "<param>[<index>]"
};

/// Builds the loss on a fresh tape from the current parameter values.
/// Must be deterministic (re-seed any dropout stream inside).
using LossBuilder = std::function<Var(Tape&)>;

inline constexpr double kRelativeFloor = 1e-7;
inline constexpr double kScaleFloor = 1e-3;
inline constexpr int kStepRetries = 6;  // step shrinks 10x per retry

inline double relative_error(double analytic, double numeric, double floor = kRelativeFloor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares tape gradients with central differences on up to
/// `samples_per_param` randomly chosen entries of each parameter tensor.
/// Uses the fourth-order stencil (f(-2e) - 8f(-e) + 8f(e) - f(2e)) / 12e with
/// e = epsilon * max(1, |x|).
/// When a stencil point changes a ReLU sign or pooling argmax, the step is
/// shrunk; entries that still cross a kink are counted as skipped.
inline GradCheckReport grad_check(const NamedParams& params, const LossBuilder& build, double epsilon = 1e-3,
                                  std::size_t samples_per_param = 16, std::uint64_t seed = 0) {
  Tape tape;
  Var loss = build(tape);
  tape.backward(loss);
  const std::uint64_t base_branch = tape.branch_hash();
  std::vector<std::vector<double>> analytic;
  for (const auto& [name, t] : params) {
    std::vector<double> g(t->size(), 0.0);
    auto tg = tape.param_grad(*t);
    std::copy(tg.begin(), tg.end(), g.begin());
    analytic.push_back(std::move(g));
  }

  Rng rng(seed);
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].second;
    std::vector<std::size_t> idx(t.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    rng.shuffle(idx);
    idx.resize(std::min(idx.size(), samples_per_param));
    // Entries far below the tensor's largest gradient are judged against that
    // scale; their finite differences are mostly rounding noise.
    double scale = 0.0;
    for (double g : analytic[p]) scale = std::max(scale, std::abs(g));
    const double floor = std::max(kRelativeFloor, kScaleFloor * scale);
    for (std::size_t k : idx) {
      const double saved = t.values[k];
      bool smooth = false;
      auto at = [&](double d) {
        t.values[k] = saved + d;
        Tape tp;
        const double v = tp.scalar(build(tp));
        smooth = smooth && tp.branch_hash() == base_branch;
        return v;
      };
      double numeric = 0.0, eps = epsilon * std::max(1.0, std::abs(saved));
      for (int attempt = 0; attempt <= kStepRetries && !smooth; ++attempt, eps *= 0.1) {
        smooth = true;
        numeric = (at(-2.0 * eps) - 8.0 * at(-eps) + 8.0 * at(eps) - at(2.0 * eps)) / (12.0 * eps);
      }
      t.values[k] = saved;
      if (!smooth) {
        ++report.skipped;
        continue;
      }
      const double err = relative_error(analytic[p][k], numeric, floor);
      ++report.checked;
      if (err >= report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = params[p].first + "[" + std::to_string(k) + "]";
      }
    }
  }
  return report;
}

}  // namespace vedsa::tk
