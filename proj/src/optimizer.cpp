#include "fewshot/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/error.hpp"

namespace fewshot {

Adam::Adam(std::vector<Parameter*> params, const AdamSettings& settings)
    : params_(std::move(params)), settings_(settings) {
    if (!(settings_.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    for (const Parameter* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double b1 = settings_.beta1, b2 = settings_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
    const double lr = settings_.learning_rate, eps = settings_.epsilon, wd = settings_.weight_decay;
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Parameter& p = *params_[k];
        double* m = m_[k].data();
        double* v = v_[k].data();
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(p.value.size());
#pragma omp parallel for simd schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            const double g = p.grad[i] + wd * p.value[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            p.value[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
}

void Adam::zero_grad() {
    for (Parameter* p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

} // namespace fewshot
