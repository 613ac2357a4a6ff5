#include "fewshot/encoder.hpp"

#include <cmath>

#include "fewshot/checkpoint.hpp"
#include "fewshot/error.hpp"
#include "fewshot/kernels.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

std::string_view to_string(Architecture a) { return a == Architecture::small_conv ? "small-conv" : "vgg16-conv"; }

Architecture parse_architecture(std::string_view s) {
    if (s == "small-conv") return Architecture::small_conv;
    if (s == "vgg16-conv") return Architecture::vgg16_conv;
    throw ConfigError("unknown encoder architecture: " + std::string(s));
}

EncoderConfig EncoderConfig::small_conv(int embedding_dim) {
    EncoderConfig cfg;
    cfg.architecture = Architecture::small_conv;
    cfg.embedding_dim = embedding_dim;
    return cfg;
}

EncoderConfig EncoderConfig::vgg16_conv(int embedding_dim) {
    EncoderConfig cfg;
    cfg.architecture = Architecture::vgg16_conv;
    cfg.embedding_dim = embedding_dim;
    return cfg;
}

void EncoderConfig::validate() const {
    if (embedding_dim <= 0) throw ConfigError("embedding_dim must be positive");
    if (input_size <= 0) throw ConfigError("input_size must be positive");
    if (architecture == Architecture::small_conv) {
        if (width <= 0 || depth <= 0) throw ConfigError("small-conv width and depth must be positive");
        if ((input_size >> depth) == 0) throw ConfigError("input_size too small for small-conv depth");
        if (pretrained) throw ConfigError("pretrained weights are only supported for vgg16-conv");
    } else {
        if ((input_size >> 5) == 0) throw ConfigError("vgg16-conv needs input_size >= 32");
        if (pretrained && pretrained_path.empty()) throw ConfigError("pretrained vgg16-conv needs pretrained_path");
    }
}

namespace {

struct LayerSpec {
    int out_channels;
    bool pool;
};

std::vector<LayerSpec> layer_plan(const EncoderConfig& cfg) {
    std::vector<LayerSpec> plan;
    if (cfg.architecture == Architecture::small_conv) {
        for (int b = 0; b < cfg.depth; ++b) plan.push_back({cfg.width, true});
        return plan;
    }
    // VGG16 convolutional part: 13 conv layers in five pooled stages.
    const int stages[5][2] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
    for (const auto& s : stages)
        for (int k = 0; k < s[1]; ++k) plan.push_back({s[0], k == s[1] - 1});
    return plan;
}

} // namespace

Encoder::Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    cfg_.validate();
    Rng rng(seed);
    int channels = Image::channels;
    int side = cfg_.input_size;
    int l = 0;
    for (const LayerSpec& spec : layer_plan(cfg_)) {
        ConvLayer layer{channels, spec.out_channels, spec.pool,
                        Parameter("conv" + std::to_string(l) + ".weight", static_cast<std::size_t>(spec.out_channels) * channels * 9),
                        Parameter("conv" + std::to_string(l) + ".bias", spec.out_channels)};
        const double std_dev = std::sqrt(2.0 / (channels * 9.0));
        for (double& w : layer.weight.value) w = std_dev * rng.normal();
        layers_.push_back(std::move(layer));
        channels = spec.out_channels;
        if (spec.pool) side /= 2;
        ++l;
    }
    flat_dim_ = channels * side * side;
    proj_weight_ = Parameter("proj.weight", static_cast<std::size_t>(cfg_.embedding_dim) * flat_dim_);
    proj_bias_ = Parameter("proj.bias", cfg_.embedding_dim);
    const double std_dev = std::sqrt(1.0 / flat_dim_);
    for (double& w : proj_weight_.value) w = std_dev * rng.normal();

    if (cfg_.pretrained) {
        // Weights converted offline into our checkpoint format.
        const Checkpoint ck = load_checkpoint(cfg_.pretrained_path);
        if (ck.encoder.architecture != cfg_.architecture || ck.encoder.input_size != cfg_.input_size ||
            ck.encoder.embedding_dim != cfg_.embedding_dim)
            throw ConfigError("pretrained weights do not match encoder configuration");
        for (Parameter* p : parameters()) p->value = ck.tensor(p->name);
    }
}

std::size_t Encoder::parameter_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.size();
    return n;
}

std::vector<Parameter*> Encoder::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    out.push_back(&proj_weight_);
    out.push_back(&proj_bias_);
    return out;
}

std::vector<const Parameter*> Encoder::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& layer : layers_) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    out.push_back(&proj_weight_);
    out.push_back(&proj_bias_);
    return out;
}

void Encoder::zero_grad() {
    for (Parameter* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

Tensor Encoder::to_batch(std::span<const Image> images) const {
    const int s = cfg_.input_size;
    Tensor batch(static_cast<int>(images.size()), Image::channels, s, s);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Image& img = images[i];
        if (img.height != s || img.width != s)
            throw ArgumentError("encoder expects " + std::to_string(s) + "x" + std::to_string(s) + " images, got " +
                                std::to_string(img.height) + "x" + std::to_string(img.width));
        for (int c = 0; c < Image::channels; ++c) {
            double* dst = batch.at(static_cast<int>(i), c);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) dst[y * s + x] = img.at(y, x, c);
        }
    }
    return batch;
}

Matrix Encoder::forward_impl(const Tensor& batch, EncoderTrace* trace) const {
    if (trace) {
        trace->inputs.clear();
        trace->activated.clear();
        trace->pool_argmax.clear();
    }
    Tensor x = batch;
    for (const ConvLayer& layer : layers_) {
        Tensor y;
        kernels::conv3x3_forward(x, layer.weight.value, layer.bias.value, layer.out_channels, y);
        kernels::relu_forward(y);
        if (trace) trace->inputs.push_back(std::move(x));
        if (layer.pool) {
            Tensor pooled;
            std::vector<int> argmax;
            kernels::maxpool2_forward(y, pooled, argmax);
            if (trace) {
                trace->activated.push_back(std::move(y));
                trace->pool_argmax.push_back(std::move(argmax));
            }
            x = std::move(pooled);
        } else {
            if (trace) {
                trace->activated.push_back(y);
                trace->pool_argmax.emplace_back();
            }
            x = std::move(y);
        }
    }
    Matrix flat(x.n, flat_dim_);
    flat.data = std::move(x.data);
    Matrix emb;
    kernels::dense_forward(flat, proj_weight_.value, proj_bias_.value, cfg_.embedding_dim, emb);
    if (trace) trace->flat = std::move(flat);
    return emb;
}

Matrix Encoder::forward(const Tensor& batch, EncoderTrace& trace) const { return forward_impl(batch, &trace); }

Matrix Encoder::encode(std::span<const Image> images) const {
    constexpr std::size_t chunk = 32;
    Matrix out(static_cast<int>(images.size()), cfg_.embedding_dim);
    for (std::size_t start = 0; start < images.size(); start += chunk) {
        const std::size_t len = std::min(chunk, images.size() - start);
        const Matrix part = forward_impl(to_batch(images.subspan(start, len)), nullptr);
        std::copy(part.data.begin(), part.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(start * cfg_.embedding_dim));
    }
    return out;
}

void Encoder::backward(const EncoderTrace& trace, const Matrix& grad_embedding) {
    Matrix grad_flat;
    kernels::dense_backward(trace.flat, proj_weight_.value, grad_embedding, &grad_flat, proj_weight_.grad, proj_bias_.grad);

    const Tensor& last = trace.activated.back();
    const bool last_pooled = layers_.back().pool;
    Tensor grad(last.n, last.c, last_pooled ? last.h / 2 : last.h, last_pooled ? last.w / 2 : last.w);
    grad.data = std::move(grad_flat.data);

    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
        ConvLayer& layer = layers_[l];
        const Tensor& act = trace.activated[l];
        Tensor grad_act;
        if (layer.pool)
            kernels::maxpool2_backward(grad, trace.pool_argmax[l], act.h, act.w, grad_act);
        else
            grad_act = std::move(grad);
        kernels::relu_backward(act, grad_act);
        Tensor grad_in;
        kernels::conv3x3_backward(trace.inputs[l], layer.weight.value, grad_act, l > 0 ? &grad_in : nullptr,
                                  layer.weight.grad, layer.bias.grad);
        grad = std::move(grad_in);
    }
}

} // namespace fewshot
