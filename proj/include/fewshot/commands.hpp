#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fewshot/evaluation.hpp"
#include "fewshot/run_config.hpp"
#include "fewshot/training.hpp"

namespace fewshot {

namespace fs = std::filesystem;

// File names inside a run directory.
inline constexpr const char* kConfigFile = "config.txt";
inline constexpr const char* kRunManifestFile = "manifest.json";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kTrainingLogFile = "training_log.jsonl";
inline constexpr const char* kCurvesCsvFile = "curves.csv";
inline constexpr const char* kCurvesSvgFile = "curves.svg";
inline constexpr const char* kEvalJsonFile = "eval_report.json";
inline constexpr const char* kEvalTextFile = "eval_report.txt";
inline constexpr const char* kSpeedReportFile = "speed_report.json";
inline constexpr const char* kEmbeddingsFile = "embeddings.csv";

struct PrepareOptions {
    fs::path out;
    fs::path source;  // empty: synthetic
    Difficulty difficulty = Difficulty::easy;
    int classes = 6;
    SplitSpec split;
    std::uint64_t seed = 7;
    bool overwrite = false;
};

/// Writes a dataset directory with manifest.json. Returns the sample count.
std::size_t cmd_prepare(const PrepareOptions& opts);

/// Trains per `cfg` and writes config, manifest, checkpoint, log and curves to `run_dir`.
TrainingResult cmd_train(const RunConfig& cfg, const fs::path& run_dir);

/// Common inputs of eval, bench and embed. Empty fields fall back to the run directory.
struct RunInputs {
    fs::path run_dir;
    fs::path checkpoint;
    fs::path dataset;  // overrides dataset.root of the stored config
    std::optional<Algorithm> expect_algorithm;
};

struct EvalOutcome {
    ConfusionMatrix confusion;
    MetricsReport metrics;
    std::vector<std::string> classes;
    std::vector<int> predictions;  // test split order
};

/// Classifies the test split, writes eval_report.json and eval_report.txt.
EvalOutcome cmd_eval(const RunInputs& in);

/// Streams `n_frames` validation images in random order (0: config value),
/// writes speed_report.json.
SpeedReport cmd_bench(const RunInputs& in, int n_frames = 0);

/// Writes embeddings.csv (or `out`). Returns the path written.
fs::path cmd_embed(const RunInputs& in, const fs::path& out = {});

} // namespace fewshot
