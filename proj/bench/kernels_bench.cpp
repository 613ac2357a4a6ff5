#include <benchmark/benchmark.h>

#include "fewshot/encoder.hpp"
#include "fewshot/kernels.hpp"
#include "fewshot/rng.hpp"

using namespace fewshot;

namespace {

Tensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(n, c, h, w);
    for (double& v : t.data) v = rng.uniform(-1, 1);
    return t;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1, 1);
    return v;
}

// args: batch, channels, side
template <auto Forward>
void conv_forward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
    const int side = static_cast<int>(state.range(2));
    const Tensor in = random_tensor(n, c, side, side, 1);
    const auto w = random_vec(static_cast<std::size_t>(c) * c * 9, 2);
    const auto b = random_vec(c, 3);
    Tensor out;
    for (auto _ : state) {
        Forward(in, w, b, c, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * n * c * c * 9LL * side * side);
}

template <auto Backward>
void conv_backward(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
    const int side = static_cast<int>(state.range(2));
    const Tensor in = random_tensor(n, c, side, side, 1);
    const Tensor go = random_tensor(n, c, side, side, 4);
    const auto w = random_vec(static_cast<std::size_t>(c) * c * 9, 2);
    std::vector<double> gw(w.size()), gb(c);
    Tensor gi;
    for (auto _ : state) {
        Backward(in, w, go, &gi, gw, gb);
        benchmark::DoNotOptimize(gi.data.data());
    }
    state.SetItemsProcessed(state.iterations() * 2LL * n * c * c * 9LL * side * side);
}

template <auto Forward>
void dense_forward(benchmark::State& state) {
    const int rows = static_cast<int>(state.range(0)), in_f = static_cast<int>(state.range(1));
    const int out_f = static_cast<int>(state.range(2));
    Matrix in(rows, in_f);
    in.data = random_vec(in.data.size(), 5);
    const auto w = random_vec(static_cast<std::size_t>(in_f) * out_f, 6);
    const auto b = random_vec(out_f, 7);
    Matrix out;
    for (auto _ : state) {
        Forward(in, w, b, out_f, out);
        benchmark::DoNotOptimize(out.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long long>(rows) * in_f * out_f);
}

void encode_batch(benchmark::State& state) {
    const Encoder enc(EncoderConfig::small_conv(), 1);
    std::vector<Image> imgs(static_cast<std::size_t>(state.range(0)), Image(84, 84, 0.5f));
    for (auto _ : state) benchmark::DoNotOptimize(enc.encode(imgs).data.data());
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(conv_forward<reference::conv3x3_forward>)->Name("conv_forward/reference")->Args({8, 16, 42})->Args({8, 3, 84});
BENCHMARK(conv_forward<kernels::conv3x3_forward>)->Name("conv_forward/openmp")->Args({8, 16, 42})->Args({8, 3, 84});
BENCHMARK(conv_backward<reference::conv3x3_backward>)->Name("conv_backward/reference")->Args({8, 16, 42})->Args({8, 16, 21});
BENCHMARK(conv_backward<kernels::conv3x3_backward>)->Name("conv_backward/openmp")->Args({8, 16, 42})->Args({8, 16, 21});
BENCHMARK(dense_forward<reference::dense_forward>)->Name("dense_forward/reference")->Args({120, 400, 256})->Args({120, 256, 512});
BENCHMARK(dense_forward<kernels::dense_forward>)->Name("dense_forward/openmp")->Args({120, 400, 256})->Args({120, 256, 512});
BENCHMARK(encode_batch)->Arg(1)->Arg(32);

BENCHMARK_MAIN();
