#include "fewshot/training.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fewshot/error.hpp"

namespace fewshot {

std::string to_jsonl(const TrainingLog& log) {
    std::string out;
    for (const auto& r : log) {
        nlohmann::ordered_json j;
        j["epoch"] = r.epoch;
        j["train_acc"] = r.train_acc;
        j["val_acc"] = r.val_acc;
        j["loss"] = r.loss;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void write_training_log(const std::filesystem::path& path, const TrainingLog& log) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write training log: " + path.string());
    out << to_jsonl(log);
}

TrainingLog read_training_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read training log: " + path.string());
    TrainingLog log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        log.push_back({j.at("epoch"), j.at("train_acc"), j.at("val_acc"), j.at("loss")});
    }
    return log;
}

int epochs_to_reach(const TrainingLog& log, double threshold) {
    for (const auto& r : log)
        if (r.train_acc >= threshold) return r.epoch;
    return -1;
}

} // namespace fewshot
