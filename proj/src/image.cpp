#include "fewshot/image.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/error.hpp"

namespace fewshot {

Image crop(const Image& img, int top, int left, int h, int w) {
    if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > img.height || left + w > img.width)
        throw ArgumentError("crop window outside image");
    Image out(h, w);
    const std::size_t row = static_cast<std::size_t>(w) * Image::channels;
    for (int y = 0; y < h; ++y) {
        const float* src = &img.pixels[(static_cast<std::size_t>(top + y) * img.width + left) * Image::channels];
        std::copy(src, src + row, &out.pixels[static_cast<std::size_t>(y) * row]);
    }
    return out;
}

Image center_crop_square(const Image& img) {
    const int side = std::min(img.width, img.height);
    return crop(img, (img.height - side) / 2, (img.width - side) / 2, side, side);
}

namespace {

struct Tap {
    int i0, i1;
    float w1;
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const int i0 = static_cast<int>(std::floor(src));
        const int i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, static_cast<float>(src - i0)};
    }
    return taps;
}

} // namespace

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0 || img.empty()) throw ArgumentError("resize to empty shape");
    if (out_h == img.height && out_w == img.width) return img;
    const auto ty = bilinear_taps(img.height, out_h);
    const auto tx = bilinear_taps(img.width, out_w);
    Image out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const Tap& a = ty[y];
        for (int x = 0; x < out_w; ++x) {
            const Tap& b = tx[x];
            for (int c = 0; c < Image::channels; ++c) {
                const float top = img.at(a.i0, b.i0, c) * (1.0f - b.w1) + img.at(a.i0, b.i1, c) * b.w1;
                const float bot = img.at(a.i1, b.i0, c) * (1.0f - b.w1) + img.at(a.i1, b.i1, c) * b.w1;
                out.at(y, x, c) = std::clamp(top * (1.0f - a.w1) + bot * a.w1, 0.0f, 1.0f);
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < Image::channels; ++c)
                out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
    return out;
}

} // namespace fewshot
