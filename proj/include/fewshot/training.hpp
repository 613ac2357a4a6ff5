#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fewshot/optimizer.hpp"
#include "fewshot/transform.hpp"

namespace fewshot {

struct EpochRecord {
    int epoch = 0;
    double train_acc = 0.0;
    double val_acc = 0.0;
    double loss = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using TrainingLog = std::vector<EpochRecord>;

/// One JSON object per line: {"epoch":..,"train_acc":..,"val_acc":..,"loss":..}
std::string to_jsonl(const TrainingLog& log);
void write_training_log(const std::filesystem::path& path, const TrainingLog& log);
TrainingLog read_training_log(const std::filesystem::path& path);

/// First epoch whose training accuracy reaches `threshold`, or -1.
int epochs_to_reach(const TrainingLog& log, double threshold);

struct TrainOptions {
    int epochs = 100;
    /// Pair batches (siamese) or episodes (prototypical) per epoch.
    int steps_per_epoch = 4;
    AdamSettings optimizer;
    TransformConfig transform;
    /// Seed of the fixed validation batches/episodes, drawn once per run.
    std::uint64_t validation_seed = 1;
};

struct TrainingResult {
    TrainingLog log;
    int best_epoch = 0;  // 0: initial weights
    double best_val_acc = -1.0;
};

/// Called after an epoch whose validation accuracy strictly beats all earlier ones.
using ImprovementCallback = std::function<void(const EpochRecord&)>;

} // namespace fewshot
