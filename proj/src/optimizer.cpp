#include "tabanno/optimizer.hpp"

#include <cmath>

#include "tabanno/error.hpp"
#include "tabanno/kernels.hpp"

namespace tabanno {

AdamState::AdamState(const AdamConfig& cfg, size_t num_params)
    : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0) {
    if (cfg.learning_rate <= 0) throw ConfigError("adam: learning rate must be positive");
}

double AdamState::current_learning_rate() const {
    if (cfg_.total_steps <= 0) return cfg_.learning_rate;
    double frac = 1.0 - static_cast<double>(t_) / static_cast<double>(cfg_.total_steps);
    return cfg_.learning_rate * std::max(frac, 0.0);
}

void AdamState::step(std::vector<double*>& params, std::vector<const double*>& grads,
                     const std::vector<size_t>& sizes) {
    double lr = current_learning_rate();
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    double clip_scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double sq = 0.0;
        for (size_t g = 0; g < grads.size(); ++g)
            for (size_t i = 0; i < sizes[g]; ++i) sq += grads[g][i] * grads[g][i];
        double norm = std::sqrt(sq);
        if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
    }

    size_t off = 0;
    for (size_t g = 0; g < grads.size(); ++g) {
        double* p = params[g];
        const double* gr = grads[g];
        size_t n = sizes[g];
        double* m = m_.data() + off;
        double* v = v_.data() + off;
        kernels::parallel_for(static_cast<int>(n), [&](int i) {
            double gi = gr[i] * clip_scale;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        });
        off += n;
    }
    if (off != m_.size()) throw ComputeError("adam: parameter layout changed between steps");
}

}  // namespace tabanno
