#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fewshot/image.hpp"
#include "fewshot/tensor.hpp"

namespace fewshot {

/// A learnable array and its accumulated gradient.
struct Parameter {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;

    Parameter() = default;
    Parameter(std::string n, std::size_t size) : name(std::move(n)), value(size, 0.0), grad(size, 0.0) {}
};

enum class Architecture { small_conv, vgg16_conv };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view s);

struct EncoderConfig {
    Architecture architecture = Architecture::small_conv;
    int embedding_dim = 256;
    int input_size = 84;
    /// Channels per block for small-conv; ignored by vgg16-conv.
    int width = 16;
    /// Number of conv+pool blocks for small-conv.
    int depth = 4;
    /// vgg16-conv only: initial weights come from `pretrained_path`.
    bool pretrained = false;
    std::string pretrained_path;

    static EncoderConfig small_conv(int embedding_dim = 256);
    static EncoderConfig vgg16_conv(int embedding_dim = 2048);

    void validate() const;
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Intermediate activations kept by a training forward pass.
struct EncoderTrace {
    std::vector<Tensor> inputs;     // input of conv layer l
    std::vector<Tensor> activated;  // relu(conv_l(inputs[l]))
    std::vector<std::vector<int>> pool_argmax;
    Matrix flat;
};

/// Conv stack (3x3 conv + ReLU, 2x2 max-pool after selected layers) followed
/// by flatten and one linear projection to embedding_dim.
class Encoder {
public:
    Encoder() = default;
    Encoder(const EncoderConfig& cfg, std::uint64_t seed);

    const EncoderConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    int embedding_dim() const { return cfg_.embedding_dim; }
    std::size_t parameter_count() const;

    /// Inference. Rows follow input order; thread-safe on a frozen encoder.
    /// Throws ArgumentError unless every image is input_size square.
    Matrix encode(std::span<const Image> images) const;

    /// Training forward pass over a prepared batch, recording `trace`.
    Matrix forward(const Tensor& batch, EncoderTrace& trace) const;
    /// Accumulates parameter gradients from d(loss)/d(embedding).
    void backward(const EncoderTrace& trace, const Matrix& grad_embedding);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void zero_grad();

    Tensor to_batch(std::span<const Image> images) const;

private:
    struct ConvLayer {
        int in_channels;
        int out_channels;
        bool pool;
        Parameter weight;
        Parameter bias;
    };

    Matrix forward_impl(const Tensor& batch, EncoderTrace* trace) const;

    EncoderConfig cfg_;
    std::uint64_t seed_ = 0;
    std::vector<ConvLayer> layers_;
    int flat_dim_ = 0;
    Parameter proj_weight_;
    Parameter proj_bias_;
};

} // namespace fewshot
