#include <doctest.h>

#include "fewshot/encoder.hpp"
#include "fewshot/error.hpp"
#include "fewshot/optimizer.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/transform.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace fewshot;

namespace {

std::vector<Image> random_images(int n, int size, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Image> out;
    for (int i = 0; i < n; ++i) {
        Image img(size, size);
        for (float& v : img.pixels) v = static_cast<float>(rng.uniform());
        out.push_back(img);
    }
    return out;
}

} // namespace

TEST_CASE("small-conv default shape") {
    const Encoder enc(EncoderConfig::small_conv(), 1);
    const auto imgs = random_images(3, 84, 1);
    const Matrix e = enc.encode(imgs);
    CHECK(e.rows == 3);
    CHECK(e.cols == 256);
}

TEST_CASE("vgg16-conv maps a batch of 8 to 8 x 2048") {
    const Encoder enc(EncoderConfig::vgg16_conv(), 1);
    const auto imgs = random_images(8, 84, 2);
    const Matrix e = enc.encode(imgs);
    CHECK(e.rows == 8);
    CHECK(e.cols == 2048);
}

TEST_CASE("encoding does not depend on batch composition") {
    const Encoder enc(test::tiny_encoder(), 3);
    const auto imgs = random_images(5, 16, 3);
    const Matrix all = enc.encode(imgs);
    for (int i = 0; i < 5; ++i) {
        const Matrix one = enc.encode(std::span(imgs).subspan(i, 1));
        for (int j = 0; j < all.cols; ++j) CHECK(one(0, j) == all(i, j));
    }
}

TEST_CASE("encoder rejects wrong input sizes and bad configs") {
    const Encoder enc(test::tiny_encoder(), 1);
    const auto imgs = random_images(1, 20, 1);
    CHECK_THROWS_AS(enc.encode(imgs), ArgumentError);

    EncoderConfig bad = test::tiny_encoder(16);
    bad.depth = 6;
    CHECK_THROWS_AS(Encoder(bad, 1), ConfigError);
    EncoderConfig vgg = EncoderConfig::vgg16_conv();
    vgg.pretrained = true;
    CHECK_THROWS_AS(Encoder(vgg, 1), ConfigError);
}

TEST_CASE("same seed gives the same weights") {
    const Encoder a(test::tiny_encoder(), 9), b(test::tiny_encoder(), 9), c(test::tiny_encoder(), 10);
    CHECK(a.parameters()[0]->value == b.parameters()[0]->value);
    CHECK(a.parameters()[0]->value != c.parameters()[0]->value);
}

TEST_CASE("encoder backward matches finite differences") {
    Encoder enc(test::tiny_encoder(8, 4), 5);
    const auto imgs = random_images(3, 8, 5);
    const Tensor batch = enc.to_batch(imgs);
    Rng rng(6);
    Matrix target(3, 4);
    for (double& v : target.data) v = rng.uniform(-1, 1);
    // loss = sum(target .* embedding)
    auto loss = [&] {
        EncoderTrace t;
        const Matrix e = enc.forward(batch, t);
        double s = 0;
        for (std::size_t i = 0; i < e.data.size(); ++i) s += e.data[i] * target.data[i];
        return s;
    };
    enc.zero_grad();
    EncoderTrace trace;
    enc.forward(batch, trace);
    enc.backward(trace, target);
    const auto r = test::gradient_check(enc.parameters(), test::snapshot_grads(enc.parameters()), loss);
    CHECK(r.checked == enc.parameter_count());
    CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("adam moves against the gradient") {
    Parameter p("x", 2);
    p.value = {1.0, -1.0};
    p.grad = {2.0, -3.0};
    AdamSettings s;
    s.learning_rate = 0.1;
    Adam adam({&p}, s);
    adam.step();
    CHECK(p.value[0] == doctest::Approx(0.9));
    CHECK(p.value[1] == doctest::Approx(-0.9));
    adam.zero_grad();
    CHECK(p.grad[0] == 0.0);
}
