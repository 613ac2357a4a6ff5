#pragma once

#include <vector>

#include "fewshot/encoder.hpp"

namespace fewshot {

struct AdamSettings {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

/// Adam over a fixed list of parameters; moment buffers follow list order.
class Adam {
public:
    Adam(std::vector<Parameter*> params, const AdamSettings& settings);

    /// Applies one update from the accumulated gradients.
    void step();
    void zero_grad();
    const AdamSettings& settings() const { return settings_; }

private:
    std::vector<Parameter*> params_;
    AdamSettings settings_;
    std::vector<std::vector<double>> m_, v_;
    long step_count_ = 0;
};

} // namespace fewshot
