#include "fewshot/kernels.hpp"

#include <algorithm>
#include <cstring>

#include "fewshot/error.hpp"

namespace fewshot::kernels {

namespace {

inline double dot(const double* a, const double* b, int n) {
    double acc = 0.0;
#pragma omp simd reduction(+ : acc)
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

inline void axpy(double alpha, const double* x, double* y, int n) {
#pragma omp simd
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Copy of `in` with a one-pixel zero border: [n][c][h+2][w+2].
Tensor pad1(const Tensor& in) {
    Tensor out(in.n, in.c, in.h + 2, in.w + 2);
    const int planes = in.n * in.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = in.data.data() + p * in.plane();
        double* dst = out.data.data() + p * out.plane();
        for (int y = 0; y < in.h; ++y) std::memcpy(dst + (y + 1) * out.w + 1, src + y * in.w, sizeof(double) * in.w);
    }
    return out;
}

void check_conv(const Tensor& in, std::size_t weight_size, int out_channels) {
    if (weight_size != static_cast<std::size_t>(out_channels) * in.c * 9)
        throw ArgumentError("conv weight size does not match channels");
}

} // namespace

void conv3x3_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias, int out_channels,
                     Tensor& out) {
    check_conv(in, weight.size(), out_channels);
    const Tensor padded = pad1(in);
    out = Tensor(in.n, out_channels, in.h, in.w);
    const int H = in.h, W = in.w, Wp = padded.w, C = in.c;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < in.n; ++i) {
        for (int oc = 0; oc < out_channels; ++oc) {
            double* o = out.at(i, oc);
            std::fill(o, o + out.plane(), bias[oc]);
            for (int ic = 0; ic < C; ++ic) {
                const double* p = padded.at(i, ic);
                const double* k = weight.data() + (static_cast<std::size_t>(oc) * C + ic) * 9;
                for (int y = 0; y < H; ++y) {
                    double* dst = o + y * W;
                    for (int ky = 0; ky < 3; ++ky) {
                        const double* src = p + (y + ky) * Wp;
                        axpy(k[ky * 3 + 0], src + 0, dst, W);
                        axpy(k[ky * 3 + 1], src + 1, dst, W);
                        axpy(k[ky * 3 + 2], src + 2, dst, W);
                    }
                }
            }
        }
    }
}

void conv3x3_backward(const Tensor& in, std::span<const double> weight, const Tensor& grad_out, Tensor* grad_in,
                      std::span<double> grad_weight, std::span<double> grad_bias) {
    const int OC = grad_out.c, C = in.c, H = in.h, W = in.w;
    check_conv(in, weight.size(), OC);
    if (grad_weight.size() != weight.size() || grad_bias.size() != static_cast<std::size_t>(OC))
        throw ArgumentError("conv gradient buffers have wrong size");
    const Tensor padded = pad1(in);
    const int Wp = padded.w;

    // Weight and bias gradients: each thread owns one output channel. Products
    // are accumulated column-wise in nine row buffers and reduced once per
    // (oc, ic) pair.
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        double bsum = 0.0;
        for (int i = 0; i < in.n; ++i) {
            const double* g = grad_out.at(i, oc);
            for (std::size_t j = 0; j < grad_out.plane(); ++j) bsum += g[j];
        }
        grad_bias[oc] += bsum;

        std::vector<double> rows(static_cast<std::size_t>(9) * W);
        for (int ic = 0; ic < C; ++ic) {
            std::fill(rows.begin(), rows.end(), 0.0);
            for (int i = 0; i < in.n; ++i) {
                const double* g = grad_out.at(i, oc);
                const double* p = padded.at(i, ic);
                for (int y = 0; y < H; ++y) {
                    const double* gr = g + y * W;
                    for (int ky = 0; ky < 3; ++ky) {
                        const double* pr = p + (y + ky) * Wp;
                        for (int kx = 0; kx < 3; ++kx) {
                            double* acc = rows.data() + (ky * 3 + kx) * W;
                            const double* src = pr + kx;
#pragma omp simd
                            for (int x = 0; x < W; ++x) acc[x] += gr[x] * src[x];
                        }
                    }
                }
            }
            double* gk = grad_weight.data() + (static_cast<std::size_t>(oc) * C + ic) * 9;
            for (int t = 0; t < 9; ++t) {
                const double* acc = rows.data() + t * W;
                double sum = 0.0;
                for (int x = 0; x < W; ++x) sum += acc[x];
                gk[t] += sum;
            }
        }
    }

    if (!grad_in) return;
    // Input gradient: full correlation with flipped kernels, each thread owns one input plane.
    Tensor grad_padded(in.n, C, H + 2, W + 2);
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < in.n; ++i) {
        for (int ic = 0; ic < C; ++ic) {
            double* gp = grad_padded.at(i, ic);
            for (int oc = 0; oc < OC; ++oc) {
                const double* g = grad_out.at(i, oc);
                const double* k = weight.data() + (static_cast<std::size_t>(oc) * C + ic) * 9;
                for (int y = 0; y < H; ++y) {
                    const double* src = g + y * W;
                    for (int ky = 0; ky < 3; ++ky) {
                        double* dst = gp + (y + ky) * Wp;
                        axpy(k[ky * 3 + 0], src, dst + 0, W);
                        axpy(k[ky * 3 + 1], src, dst + 1, W);
                        axpy(k[ky * 3 + 2], src, dst + 2, W);
                    }
                }
            }
        }
    }
    *grad_in = Tensor(in.n, C, H, W);
    const int planes = in.n * C;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = grad_padded.data.data() + p * grad_padded.plane();
        double* dst = grad_in->data.data() + p * grad_in->plane();
        for (int y = 0; y < H; ++y) std::memcpy(dst + y * W, src + (y + 1) * Wp + 1, sizeof(double) * W);
    }
}

void relu_forward(Tensor& t) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(t.data.size());
    double* d = t.data.data();
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > 0.0 ? d[i] : 0.0;
}

void relu_backward(const Tensor& activated, Tensor& grad) {
    if (activated.data.size() != grad.data.size()) throw ArgumentError("relu gradient shape mismatch");
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grad.data.size());
    const double* a = activated.data.data();
    double* g = grad.data.data();
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) g[i] = a[i] > 0.0 ? g[i] : 0.0;
}

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
    const int oh = in.h / 2, ow = in.w / 2;
    if (oh == 0 || ow == 0) throw ArgumentError("feature map too small to pool");
    out = Tensor(in.n, in.c, oh, ow);
    argmax.assign(out.data.size(), 0);
    const int planes = in.n * in.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = in.data.data() + p * in.plane();
        double* dst = out.data.data() + p * out.plane();
        int* arg = argmax.data() + p * out.plane();
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                int best = (2 * y) * in.w + 2 * x;
                for (int cand : {best + 1, best + in.w, best + in.w + 1})
                    if (src[cand] > src[best]) best = cand;
                dst[y * ow + x] = src[best];
                arg[y * ow + x] = best;
            }
    }
}

void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int in_h, int in_w, Tensor& grad_in) {
    grad_in = Tensor(grad_out.n, grad_out.c, in_h, in_w);
    const int planes = grad_out.n * grad_out.c;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* g = grad_out.data.data() + p * grad_out.plane();
        const int* arg = argmax.data() + p * grad_out.plane();
        double* dst = grad_in.data.data() + p * grad_in.plane();
        for (std::size_t j = 0; j < grad_out.plane(); ++j) dst[arg[j]] += g[j];
    }
}

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, int out_features,
                   Matrix& out) {
    if (weight.size() != static_cast<std::size_t>(out_features) * in.cols || bias.size() != static_cast<std::size_t>(out_features))
        throw ArgumentError("dense weight size does not match input width");
    out = Matrix(in.rows, out_features);
    const int K = in.cols;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < in.rows; ++i)
        for (int o = 0; o < out_features; ++o)
            out(i, o) = bias[o] + dot(weight.data() + static_cast<std::size_t>(o) * K, in.data.data() + static_cast<std::size_t>(i) * K, K);
}

void dense_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias) {
    const int O = grad_out.cols, K = in.cols;
    if (weight.size() != static_cast<std::size_t>(O) * K || grad_weight.size() != weight.size() ||
        grad_bias.size() != static_cast<std::size_t>(O) || grad_out.rows != in.rows)
        throw ArgumentError("dense gradient shapes do not match");
#pragma omp parallel for schedule(static)
    for (int o = 0; o < O; ++o) {
        double* gw = grad_weight.data() + static_cast<std::size_t>(o) * K;
        double bsum = 0.0;
        for (int i = 0; i < in.rows; ++i) {
            const double g = grad_out(i, o);
            bsum += g;
            axpy(g, in.data.data() + static_cast<std::size_t>(i) * K, gw, K);
        }
        grad_bias[o] += bsum;
    }
    if (!grad_in) return;
    *grad_in = Matrix(in.rows, K);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < in.rows; ++i) {
        double* gi = grad_in->data.data() + static_cast<std::size_t>(i) * K;
        for (int o = 0; o < O; ++o) axpy(grad_out(i, o), weight.data() + static_cast<std::size_t>(o) * K, gi, K);
    }
}

} // namespace fewshot::kernels
