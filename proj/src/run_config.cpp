#include "fewshot/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fewshot/error.hpp"

namespace fewshot {

std::string_view to_string(Algorithm a) { return a == Algorithm::sn_knn ? "sn-knn" : "pn"; }

Algorithm parse_algorithm(std::string_view s) {
    if (s == "sn-knn") return Algorithm::sn_knn;
    if (s == "pn") return Algorithm::pn;
    throw ConfigError("unknown algorithm: " + std::string(s) + " (expected sn-knn or pn)");
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
    const std::string_view v = trim(value);
    auto i = [&] { return parse_number<int>(key, v); };
    auto u = [&] { return parse_number<std::uint64_t>(key, v); };
    auto d = [&] { return parse_number<double>(key, v); };

    if (key == "algorithm") algorithm = parse_algorithm(v);
    else if (key == "encoder.architecture") encoder.architecture = parse_architecture(v);
    else if (key == "encoder.embedding_dim") encoder.embedding_dim = i();
    else if (key == "encoder.width") encoder.width = i();
    else if (key == "encoder.depth") encoder.depth = i();
    else if (key == "encoder.pretrained") encoder.pretrained = parse_bool(key, v);
    else if (key == "encoder.pretrained_path") encoder.pretrained_path = std::string(v);
    else if (key == "input_size") encoder.input_size = transform.input_size = i();
    else if (key == "transform.scale_min") transform.scale_min = d();
    else if (key == "transform.scale_max") transform.scale_max = d();
    else if (key == "transform.flip_probability") transform.flip_probability = d();
    else if (key == "split.train") split.train = i();
    else if (key == "split.validation") split.validation = i();
    else if (key == "split.test") split.test = i();
    else if (key == "dataset.root") dataset_root = std::string(v);
    else if (key == "dataset.synthetic") synthetic = parse_difficulty(v);
    else if (key == "dataset.classes") synthetic_classes = i();
    else if (key == "epochs") epochs = i();
    else if (key == "steps_per_epoch") steps_per_epoch = i();
    else if (key == "optimizer.learning_rate") optimizer.learning_rate = d();
    else if (key == "optimizer.weight_decay") optimizer.weight_decay = d();
    else if (key == "seed.data") data_seed = u();
    else if (key == "seed.model") model_seed = u();
    else if (key == "seed.sampler") sampler_seed = u();
    else if (key == "seed.validation") validation_seed = u();
    else if (key == "sn.hidden") sn_hidden = i();
    else if (key == "sn.anchors") sn_anchors = i();
    else if (key == "knn.k") knn_k = i();
    else if (key == "pn.n_support") pn_support = i();
    else if (key == "pn.n_query") pn_query = i();
    else if (key == "pn.loss") pn_loss = parse_loss_form(v);
    else if (key == "bench.frames") bench_frames = i();
    else if (key == "plot") plot = parse_bool(key, v);
    else throw ConfigError("unknown config key: " + std::string(key));
}

void RunConfig::apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
    encoder.validate();
    transform.validate();
    if (encoder.input_size != transform.input_size) throw ConfigError("encoder and transform input sizes differ");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
    if (knn_k < 1 || knn_k % 2 == 0) throw ConfigError("knn.k must be a positive odd number");
    if (sn_hidden < 1 || sn_anchors < 1) throw ConfigError("sn.hidden and sn.anchors must be positive");
    if (pn_support < 1 || pn_query < 1) throw ConfigError("pn.n_support and pn.n_query must be positive");
    if (bench_frames < 1) throw ConfigError("bench.frames must be positive");
    if (dataset_root.empty() && synthetic_classes < 2) throw ConfigError("dataset.classes must be >= 2");
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "algorithm = " << to_string(algorithm) << '\n'
       << "encoder.architecture = " << to_string(encoder.architecture) << '\n'
       << "encoder.embedding_dim = " << encoder.embedding_dim << '\n'
       << "encoder.width = " << encoder.width << '\n'
       << "encoder.depth = " << encoder.depth << '\n'
       << "encoder.pretrained = " << (encoder.pretrained ? "true" : "false") << '\n'
       << "encoder.pretrained_path = " << encoder.pretrained_path << '\n'
       << "input_size = " << encoder.input_size << '\n'
       << "transform.scale_min = " << fmt_double(transform.scale_min) << '\n'
       << "transform.scale_max = " << fmt_double(transform.scale_max) << '\n'
       << "transform.flip_probability = " << fmt_double(transform.flip_probability) << '\n'
       << "split.train = " << split.train << '\n'
       << "split.validation = " << split.validation << '\n'
       << "split.test = " << split.test << '\n'
       << "dataset.root = " << dataset_root << '\n'
       << "dataset.synthetic = " << to_string(synthetic) << '\n'
       << "dataset.classes = " << synthetic_classes << '\n'
       << "epochs = " << epochs << '\n'
       << "steps_per_epoch = " << steps_per_epoch << '\n'
       << "optimizer.learning_rate = " << fmt_double(optimizer.learning_rate) << '\n'
       << "optimizer.weight_decay = " << fmt_double(optimizer.weight_decay) << '\n'
       << "seed.data = " << data_seed << '\n'
       << "seed.model = " << model_seed << '\n'
       << "seed.sampler = " << sampler_seed << '\n'
       << "seed.validation = " << validation_seed << '\n'
       << "sn.hidden = " << sn_hidden << '\n'
       << "sn.anchors = " << sn_anchors << '\n'
       << "knn.k = " << knn_k << '\n'
       << "pn.n_support = " << pn_support << '\n'
       << "pn.n_query = " << pn_query << '\n'
       << "pn.loss = " << to_string(pn_loss) << '\n'
       << "bench.frames = " << bench_frames << '\n'
       << "plot = " << (plot ? "true" : "false") << '\n';
    return os.str();
}

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find('=') == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        cfg.apply_override(line);
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write config file: " + path.string());
    out << cfg.to_text();
}

Dataset resolve_dataset(const RunConfig& cfg) {
    if (cfg.dataset_root.empty())
        return generate_synthetic_dataset(cfg.synthetic_classes, cfg.split, cfg.synthetic, cfg.data_seed);
    if (has_manifest(cfg.dataset_root)) return load_prepared_dataset(cfg.dataset_root);
    return load_dataset(cfg.dataset_root, cfg.split, cfg.data_seed);
}

} // namespace fewshot
