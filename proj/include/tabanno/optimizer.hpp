#pragma once

#include <cstdint>
#include <vector>

#include "tabanno/tensor.hpp"

namespace tabanno {

struct AdamConfig {
    double learning_rate = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double clip_norm = 0.0;  // 0 disables clipping
    // Linear decay to zero over total_steps; 0 keeps the rate constant.
    long total_steps = 0;
};

// Adam with bias correction over one flat parameter group. Each task owns
// its own instance so moment estimates and schedule positions never mix.
class AdamState {
  public:
    AdamState() = default;
    AdamState(const AdamConfig& cfg, size_t num_params);

    // Applies one update. `params` and `grads` are parallel flat views.
    void step(std::vector<double*>& params, std::vector<const double*>& grads,
              const std::vector<size_t>& sizes);

    double current_learning_rate() const;  // rate the next step will use
    long steps_taken() const { return t_; }
    const std::vector<double>& first_moments() const { return m_; }
    const std::vector<double>& second_moments() const { return v_; }

  private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    long t_ = 0;  // completed steps
};

}  // namespace tabanno
