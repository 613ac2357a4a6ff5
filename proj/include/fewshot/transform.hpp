#pragma once

#include "fewshot/image.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

struct TransformConfig {
    int input_size = 84;
    double scale_min = 1.1;
    double scale_max = 1.5;
    double flip_probability = 0.5;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
};

/// Training augmentation: center square crop, random upscale to
/// round(u * input_size) with u ~ U[scale_min, scale_max], random
/// input_size crop, horizontal flip with flip_probability.
Image transform_train(const Image& img, Rng& rng, const TransformConfig& cfg);

/// Deterministic counterpart: center square crop, resize to input_size.
Image transform_eval(const Image& img, const TransformConfig& cfg);

} // namespace fewshot
