#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "fewshot/dataset.hpp"
#include "fewshot/encoder.hpp"
#include "fewshot/transform.hpp"

namespace fewshot::test {

inline SplitSpec tiny_split() { return SplitSpec{6, 4, 3}; }

inline Dataset tiny_dataset(int classes = 3, std::uint64_t seed = 5, Difficulty d = Difficulty::easy) {
    return generate_synthetic_dataset(classes, tiny_split(), d, seed);
}

inline TransformConfig tiny_transform(int size = 16) {
    TransformConfig t;
    t.input_size = size;
    return t;
}

inline EncoderConfig tiny_encoder(int size = 16, int dim = 8) {
    EncoderConfig c = EncoderConfig::small_conv(dim);
    c.input_size = size;
    c.width = 4;
    c.depth = 2;
    return c;
}

inline bool close_rel(double a, double b, double rel = 1e-6, double abs_floor = 1e-12) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b)}) + abs_floor;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("fewshot_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace fewshot::test
