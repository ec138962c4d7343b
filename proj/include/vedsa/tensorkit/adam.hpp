#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "vedsa/tensorkit/tape.hpp"

namespace vedsa::tk {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias correction. Moments are keyed by the
/// position of each tensor in the parameter list given at construction.
class Adam {
 public:
  Adam(const NamedParams& params, AdamConfig cfg = {}) : params_(params), cfg_(cfg) {
    for (const auto& [name, t] : params_) {
      m_.emplace_back(t->size(), 0.0);
      v_.emplace_back(t->size(), 0.0);
    }
  }

  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  void step() {
    ++step_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t p = 0; p < params_.size(); ++p) {
      Tensor& t = *params_[p].second;
      if (t.size() != m_[p].size()) throw StructuralError("adam: parameter shape changed");
      for (std::size_t k = 0; k < t.size(); ++k) {
        const double g = t.grad[k];
        m_[p][k] = cfg_.beta1 * m_[p][k] + (1.0 - cfg_.beta1) * g;
        v_[p][k] = cfg_.beta2 * v_[p][k] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = m_[p][k] / c1;
        const double vhat = v_[p][k] / c2;
        t.values[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

 private:
  NamedParams params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t step_ = 0;
};

}  // namespace vedsa::tk
