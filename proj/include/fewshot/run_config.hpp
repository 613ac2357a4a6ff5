#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "fewshot/dataset.hpp"
#include "fewshot/encoder.hpp"
#include "fewshot/optimizer.hpp"
#include "fewshot/protonet.hpp"
#include "fewshot/transform.hpp"

namespace fewshot {

enum class Algorithm { sn_knn, pn };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view s);

/// Everything needed to replay a run. Serialized as flat `key = value`
/// lines; see README for the key list.
struct RunConfig {
    Algorithm algorithm = Algorithm::pn;
    EncoderConfig encoder;
    TransformConfig transform;
    SplitSpec split;

    std::string dataset_root;  // empty: synthetic
    Difficulty synthetic = Difficulty::easy;
    int synthetic_classes = 6;

    int epochs = 30;
    int steps_per_epoch = 4;
    AdamSettings optimizer;

    std::uint64_t data_seed = 7;
    std::uint64_t model_seed = 3;
    std::uint64_t sampler_seed = 11;
    std::uint64_t validation_seed = 1;

    int sn_hidden = 512;
    int sn_anchors = 15;
    int knn_k = 5;
    int pn_support = 5;
    int pn_query = 5;
    PnLossForm pn_loss = PnLossForm::binary;

    int bench_frames = 120;
    bool plot = true;

    /// Sets one key from its text form. Throws ConfigError on unknown keys or bad values.
    void set(std::string_view key, std::string_view value);
    /// Parses "key=value".
    void apply_override(std::string_view assignment);
    void validate() const;
    std::string to_text() const;
};

RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

/// Synthetic data, a prepared directory (manifest.json), or raw class folders.
Dataset resolve_dataset(const RunConfig& cfg);

} // namespace fewshot
