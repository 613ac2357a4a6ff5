#include "fewshot/transform.hpp"

#include <cmath>

#include "fewshot/error.hpp"

namespace fewshot {

void TransformConfig::validate() const {
    if (input_size <= 0) throw ConfigError("input_size must be positive");
    if (scale_min < 1.0) throw ConfigError("scale range lower bound must be >= 1.0");
    if (scale_max < scale_min) throw ConfigError("scale range is empty");
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw ConfigError("flip_probability must be in [0,1]");
}

Image transform_train(const Image& img, Rng& rng, const TransformConfig& cfg) {
    cfg.validate();
    if (img.empty()) throw ArgumentError("empty image");
    const double u = rng.uniform(cfg.scale_min, cfg.scale_max);
    const int scaled = std::max(cfg.input_size, static_cast<int>(std::lround(u * cfg.input_size)));
    const int slack = scaled - cfg.input_size;
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack) + 1));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack) + 1));
    const bool flip = rng.bernoulli(cfg.flip_probability);

    Image out = resize_bilinear(center_crop_square(img), scaled, scaled);
    if (slack > 0) out = crop(out, top, left, cfg.input_size, cfg.input_size);
    if (flip) out = flip_horizontal(out);
    return out;
}

Image transform_eval(const Image& img, const TransformConfig& cfg) {
    cfg.validate();
    if (img.empty()) throw ArgumentError("empty image");
    return resize_bilinear(center_crop_square(img), cfg.input_size, cfg.input_size);
}

} // namespace fewshot
