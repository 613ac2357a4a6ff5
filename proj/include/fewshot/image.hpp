#pragma once

#include <cstddef>
#include <vector>

namespace fewshot {

/// Interleaved (HWC) three-channel image with values in [0, 1].
struct Image {
    static constexpr int channels = 3;

    int height = 0;
    int width = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, float fill = 0.0f)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * channels, fill) {}

    float& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

    bool empty() const { return pixels.empty(); }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Copy of the h x w window whose top-left corner is (top, left).
Image crop(const Image& img, int top, int left, int h, int w);

/// Largest centered square. Side is min(width, height).
Image center_crop_square(const Image& img);

/// Bilinear resize with half-pixel centers; same-size resize is exact.
Image resize_bilinear(const Image& img, int out_h, int out_w);

Image flip_horizontal(const Image& img);

} // namespace fewshot
