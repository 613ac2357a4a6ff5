#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/encoder.hpp"

namespace fewshot {

struct NamedTensor {
    std::string name;
    std::vector<double> data;
};

/// On-disk model state. Layout: the magic line "FEWSHOT-CKPT 1\n", a
/// little-endian u64 header length, a JSON header, then the raw float64
/// payload of every tensor in header order.
struct Checkpoint {
    std::string algorithm;  // "sn-knn" or "pn"
    EncoderConfig encoder;
    std::uint64_t model_seed = 0;
    std::vector<std::string> classes;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<NamedTensor> tensors;

    /// Throws ConfigError if absent.
    const std::vector<double>& tensor(const std::string& name) const;
    bool has_tensor(const std::string& name) const;
    void put(std::string name, std::vector<double> data);
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const EncoderConfig& cfg);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

} // namespace fewshot
