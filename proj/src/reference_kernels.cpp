#include "fewshot/kernels.hpp"

#include "fewshot/error.hpp"

namespace fewshot::reference {

namespace {

double padded_at(const Tensor& t, int i, int c, int y, int x) {
    if (y < 0 || y >= t.h || x < 0 || x >= t.w) return 0.0;
    return t.at(i, c)[y * t.w + x];
}

} // namespace

void conv3x3_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias, int out_channels,
                     Tensor& out) {
    if (weight.size() != static_cast<std::size_t>(out_channels) * in.c * 9) throw ArgumentError("conv weight size");
    out = Tensor(in.n, out_channels, in.h, in.w);
    for (int i = 0; i < in.n; ++i)
        for (int oc = 0; oc < out_channels; ++oc)
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    double s = bias[oc];
                    for (int ic = 0; ic < in.c; ++ic)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx)
                                s += weight[((oc * in.c + ic) * 3 + ky) * 3 + kx] * padded_at(in, i, ic, y + ky - 1, x + kx - 1);
                    out.at(i, oc)[y * in.w + x] = s;
                }
}

void conv3x3_backward(const Tensor& in, std::span<const double> weight, const Tensor& grad_out, Tensor* grad_in,
                      std::span<double> grad_weight, std::span<double> grad_bias) {
    const int OC = grad_out.c;
    if (grad_in) *grad_in = Tensor(in.n, in.c, in.h, in.w);
    for (int i = 0; i < in.n; ++i)
        for (int oc = 0; oc < OC; ++oc)
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    const double g = grad_out.at(i, oc)[y * in.w + x];
                    grad_bias[oc] += g;
                    for (int ic = 0; ic < in.c; ++ic)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int yy = y + ky - 1, xx = x + kx - 1;
                                if (yy < 0 || yy >= in.h || xx < 0 || xx >= in.w) continue;
                                const std::size_t wi = ((static_cast<std::size_t>(oc) * in.c + ic) * 3 + ky) * 3 + kx;
                                grad_weight[wi] += g * in.at(i, ic)[yy * in.w + xx];
                                if (grad_in) grad_in->at(i, ic)[yy * in.w + xx] += g * weight[wi];
                            }
                }
}

void relu_forward(Tensor& t) {
    for (double& v : t.data)
        if (v < 0.0) v = 0.0;
}

void relu_backward(const Tensor& activated, Tensor& grad) {
    for (std::size_t i = 0; i < grad.data.size(); ++i)
        if (!(activated.data[i] > 0.0)) grad.data[i] = 0.0;
}

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax) {
    out = Tensor(in.n, in.c, in.h / 2, in.w / 2);
    argmax.assign(out.data.size(), 0);
    std::size_t k = 0;
    for (int i = 0; i < in.n; ++i)
        for (int c = 0; c < in.c; ++c)
            for (int y = 0; y < out.h; ++y)
                for (int x = 0; x < out.w; ++x, ++k) {
                    const double* p = in.at(i, c);
                    int best = -1;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int idx = (2 * y + dy) * in.w + 2 * x + dx;
                            if (best < 0 || p[idx] > p[best]) best = idx;
                        }
                    out.data[k] = p[best];
                    argmax[k] = best;
                }
}

void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int in_h, int in_w, Tensor& grad_in) {
    grad_in = Tensor(grad_out.n, grad_out.c, in_h, in_w);
    std::size_t k = 0;
    for (int i = 0; i < grad_out.n; ++i)
        for (int c = 0; c < grad_out.c; ++c)
            for (std::size_t j = 0; j < grad_out.plane(); ++j, ++k) grad_in.at(i, c)[argmax[k]] += grad_out.data[k];
}

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, int out_features,
                   Matrix& out) {
    if (weight.size() != static_cast<std::size_t>(out_features) * in.cols) throw ArgumentError("dense weight size");
    out = Matrix(in.rows, out_features);
    for (int i = 0; i < in.rows; ++i)
        for (int o = 0; o < out_features; ++o) {
            double s = bias[o];
            for (int k = 0; k < in.cols; ++k) s += weight[static_cast<std::size_t>(o) * in.cols + k] * in(i, k);
            out(i, o) = s;
        }
}

void dense_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias) {
    if (grad_in) *grad_in = Matrix(in.rows, in.cols);
    for (int i = 0; i < in.rows; ++i)
        for (int o = 0; o < grad_out.cols; ++o) {
            const double g = grad_out(i, o);
            grad_bias[o] += g;
            for (int k = 0; k < in.cols; ++k) {
                grad_weight[static_cast<std::size_t>(o) * in.cols + k] += g * in(i, k);
                if (grad_in) (*grad_in)(i, k) += g * weight[static_cast<std::size_t>(o) * in.cols + k];
            }
        }
}

} // namespace fewshot::reference
