#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fewshot {

/// Dense NCHW batch of feature maps.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, 0.0) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t item() const { return plane() * c; }
    double* at(int i, int ch) { return data.data() + i * item() + ch * plane(); }
    const double* at(int i, int ch) const { return data.data() + i * item() + ch * plane(); }
};

/// Row-major matrix; one row per sample.
struct Matrix {
    int rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int i) const { return {data.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)}; }
    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

} // namespace fewshot
