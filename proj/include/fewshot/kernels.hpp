#pragma once

#include <span>
#include <vector>

#include "fewshot/tensor.hpp"

// Compute kernels behind the encoder and the similarity head.
//
// `kernels` holds the OpenMP versions used by the models. `reference` holds
// plain serial loops with the same signatures, used by tests and the
// benchmark only.
//
// Each output element of a parallel kernel is written by a single thread in a
// fixed summation order, so results do not depend on the thread count.
//
// Conv weights are [out][in][3][3] with zero padding 1; dense weights are
// [out][in]. Backward kernels accumulate (+=) into weight and bias gradients
// and overwrite the input gradient (pass nullptr to skip it).

namespace fewshot {

namespace kernels {

void conv3x3_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias, int out_channels,
                     Tensor& out);
void conv3x3_backward(const Tensor& in, std::span<const double> weight, const Tensor& grad_out, Tensor* grad_in,
                      std::span<double> grad_weight, std::span<double> grad_bias);

void relu_forward(Tensor& t);
/// Zeroes grad where the forward output was not positive.
void relu_backward(const Tensor& activated, Tensor& grad);

/// 2x2 window, stride 2, odd trailing row/column dropped.
void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax);
void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int in_h, int in_w, Tensor& grad_in);

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, int out_features,
                   Matrix& out);
void dense_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias);

} // namespace kernels

namespace reference {

void conv3x3_forward(const Tensor& in, std::span<const double> weight, std::span<const double> bias, int out_channels,
                     Tensor& out);
void conv3x3_backward(const Tensor& in, std::span<const double> weight, const Tensor& grad_out, Tensor* grad_in,
                      std::span<double> grad_weight, std::span<double> grad_bias);

void relu_forward(Tensor& t);
void relu_backward(const Tensor& activated, Tensor& grad);

void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<int>& argmax);
void maxpool2_backward(const Tensor& grad_out, const std::vector<int>& argmax, int in_h, int in_w, Tensor& grad_in);

void dense_forward(const Matrix& in, std::span<const double> weight, std::span<const double> bias, int out_features,
                   Matrix& out);
void dense_backward(const Matrix& in, std::span<const double> weight, const Matrix& grad_out, Matrix* grad_in,
                    std::span<double> grad_weight, std::span<double> grad_bias);

} // namespace reference

} // namespace fewshot
