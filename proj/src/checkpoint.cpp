#include "fewshot/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fewshot/error.hpp"

namespace fewshot {

namespace {

constexpr char kMagic[] = "FEWSHOT-CKPT 1\n";

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

} // namespace

const std::vector<double>& Checkpoint::tensor(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return t.data;
    throw ConfigError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return true;
    return false;
}

void Checkpoint::put(std::string name, std::vector<double> data) {
    for (auto& t : tensors)
        if (t.name == name) {
            t.data = std::move(data);
            return;
        }
    tensors.push_back({std::move(name), std::move(data)});
}

nlohmann::json to_json(const EncoderConfig& cfg) {
    return {{"architecture", to_string(cfg.architecture)},
            {"embedding_dim", cfg.embedding_dim},
            {"input_size", cfg.input_size},
            {"width", cfg.width},
            {"depth", cfg.depth},
            {"pretrained", cfg.pretrained},
            {"pretrained_path", cfg.pretrained_path}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig cfg;
    cfg.architecture = parse_architecture(j.at("architecture").get<std::string>());
    cfg.embedding_dim = j.at("embedding_dim");
    cfg.input_size = j.at("input_size");
    cfg.width = j.at("width");
    cfg.depth = j.at("depth");
    cfg.pretrained = j.at("pretrained");
    cfg.pretrained_path = j.at("pretrained_path");
    return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    nlohmann::json header;
    header["algorithm"] = ck.algorithm;
    header["encoder"] = to_json(ck.encoder);
    header["model_seed"] = ck.model_seed;
    header["classes"] = ck.classes;
    header["meta"] = ck.meta;
    auto& table = header["tensors"] = nlohmann::json::array();
    for (const auto& t : ck.tensors) table.push_back({{"name", t.name}, {"size", t.data.size()}});
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out.write(kMagic, sizeof(kMagic) - 1);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : ck.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[sizeof(kMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) throw ConfigError("not a checkpoint file: " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw ConfigError("truncated checkpoint header: " + path.string());

    Checkpoint ck;
    try {
        const auto header = nlohmann::json::parse(text);
        ck.algorithm = header.at("algorithm");
        ck.encoder = encoder_config_from_json(header.at("encoder"));
        ck.model_seed = header.at("model_seed");
        ck.classes = header.at("classes").get<std::vector<std::string>>();
        ck.meta = header.at("meta");
        for (const auto& entry : header.at("tensors")) {
            NamedTensor t{entry.at("name"), std::vector<double>(entry.at("size").get<std::size_t>())};
            in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
            if (!in) throw ConfigError("truncated checkpoint payload: " + path.string());
            ck.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint header: ") + e.what());
    }
    return ck;
}

} // namespace fewshot
