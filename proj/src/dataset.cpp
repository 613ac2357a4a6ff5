#include "fewshot/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "fewshot/error.hpp"
#include "fewshot/image_io.hpp"
#include "fewshot/rng.hpp"

namespace fs = std::filesystem;

namespace fewshot {

std::string_view to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    if (s == "train") return Split::train;
    if (s == "validation" || s == "val") return Split::validation;
    if (s == "test") return Split::test;
    throw ArgumentError("unknown split: " + std::string(s));
}

int SplitSpec::count(Split s) const {
    switch (s) {
    case Split::train: return train;
    case Split::validation: return validation;
    case Split::test: return test;
    }
    return 0;
}

std::string_view to_string(Difficulty d) { return d == Difficulty::easy ? "easy" : "hard"; }

Difficulty parse_difficulty(std::string_view s) {
    if (s == "easy") return Difficulty::easy;
    if (s == "hard") return Difficulty::hard;
    throw ArgumentError("unknown difficulty: " + std::string(s));
}

Dataset::Dataset(std::vector<std::string> classes, std::vector<ImageSample> samples, SplitSpec spec)
    : classes_(std::move(classes)), samples_(std::move(samples)), spec_(spec) {
    const int m = class_count();
    for (auto& groups : by_class_) groups.assign(m, {});
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const ImageSample& s = samples_[i];
        if (s.class_id < 0 || s.class_id >= m)
            throw ArgumentError("sample " + s.source_id + " has class_id outside [0, " + std::to_string(m) + ")");
        for (float v : s.image.pixels)
            if (!(v >= 0.0f && v <= 1.0f)) throw ArgumentError("sample " + s.source_id + " has pixel outside [0,1]");
        by_class_[static_cast<int>(s.split)][s.class_id].push_back(i);
    }
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (const auto& group : by_class(s)) out.insert(out.end(), group.begin(), group.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t Dataset::count(Split s) const {
    std::size_t n = 0;
    for (const auto& group : by_class(s)) n += group.size();
    return n;
}

// ---------------------------------------------------------------------------
// Synthetic flames

namespace {

struct ClassStyle {
    double hue;
    double saturation;
    double cx, cy;  // relative to width / height
    double rx, ry;  // relative radii
    double stripe_freq;   // cycles per pixel
    double stripe_angle;  // radians
    double stripe_amp;
};

struct Jitter {
    double center;
    double scale;
    double hue;
    double brightness_min;
    double noise;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    // splitmix64 finaliser over a combined key
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
    }
}

std::vector<ClassStyle> class_styles(int n, Difficulty difficulty) {
    std::vector<ClassStyle> styles(n);
    // Partner class -> the class it imitates.
    std::vector<int> base(n);
    for (int c = 0; c < n; ++c) base[c] = c;
    if (difficulty == Difficulty::hard)
        for (auto [a, b] : confusable_pairs(n)) base[b] = a;

    // Distinct looks are handed out per group so paired classes share one.
    std::vector<int> group(n, -1);
    int n_groups = 0;
    for (int c = 0; c < n; ++c)
        if (base[c] == c) group[c] = n_groups++;
    for (int c = 0; c < n; ++c) group[c] = group[base[c]];

    for (int c = 0; c < n; ++c) {
        const int g = group[c];
        ClassStyle& s = styles[c];
        s.hue = static_cast<double>(g) / n_groups;
        s.saturation = 0.85;
        s.cx = 0.5;
        s.cy = 0.55;
        s.rx = 0.16 + 0.12 * ((g * 3) % n_groups) / std::max(1, n_groups - 1);
        s.ry = 0.20 + 0.14 * ((g * 5 + 1) % n_groups) / std::max(1, n_groups - 1);
        s.stripe_freq = 0.08 + 0.05 * (g % 3);
        s.stripe_angle = std::numbers::pi * g / n_groups;
        s.stripe_amp = 0.3;
        if (base[c] != c) {
            s.hue += 0.03;
            s.ry *= 1.06;
        }
    }
    return styles;
}

Jitter jitter_for(Difficulty d) {
    if (d == Difficulty::easy) return {0.05, 0.08, 0.01, 0.9, 0.02};
    return {0.12, 0.15, 0.035, 0.7, 0.06};
}

Image render_flame(const ClassStyle& style, const Jitter& jit, int width, int height, Rng& rng) {
    const double cx = (style.cx + rng.uniform(-jit.center, jit.center)) * width;
    const double cy = (style.cy + rng.uniform(-jit.center, jit.center)) * height;
    const double scale = 1.0 + rng.uniform(-jit.scale, jit.scale);
    const double rx = style.rx * scale * width;
    const double ry = style.ry * scale * height;
    const double hue = style.hue + rng.uniform(-jit.hue, jit.hue);
    const double brightness = rng.uniform(jit.brightness_min, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ca = std::cos(style.stripe_angle), sa = std::sin(style.stripe_angle);

    double tint[3];
    hsv_to_rgb(hue, style.saturation, 1.0, tint);

    Image img(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = (x - cx) / rx;
            double dy = (y - cy) / ry;
            if (dy < 0) dy /= 1.5;  // tall tip above the base
            const double body = std::exp(-1.5 * (dx * dx + dy * dy));
            const double stripes = 1.0 + style.stripe_amp * std::sin(2.0 * std::numbers::pi * style.stripe_freq * (x * ca + y * sa) + phase);
            const double intensity = std::clamp(body * stripes * brightness, 0.0, 1.0);
            const double core = std::max(0.0, intensity - 0.75) / 0.25;
            for (int c = 0; c < 3; ++c) {
                double v = tint[c] * intensity * (1.0 - 0.5 * core) + 0.5 * core + 0.04;
                v += jit.noise * rng.normal();
                const double q = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
                img.at(y, x, c) = static_cast<float>(q) / 255.0f;
            }
        }
    }
    return img;
}

std::string class_name(int c, int n) {
    const int digits = std::max(2, static_cast<int>(std::to_string(n).size()));
    std::string num = std::to_string(c + 1);
    return "class_" + std::string(digits - num.size(), '0') + num;
}

} // namespace

std::vector<std::pair<int, int>> confusable_pairs(int n_classes) {
    if (n_classes < 2) return {};
    if (n_classes < 4) return {{0, 1}};
    return {{0, 1}, {n_classes - 2, n_classes - 1}};
}

Dataset generate_synthetic_dataset(int n_classes, const SplitSpec& spec, Difficulty difficulty,
                                   std::uint64_t seed, const SyntheticOptions& opts) {
    if (n_classes < 2) throw ArgumentError("synthetic dataset needs at least 2 classes");
    if (spec.train < 0 || spec.validation < 0 || spec.test < 0) throw ArgumentError("negative split count");
    if (opts.width <= 0 || opts.height <= 0) throw ArgumentError("synthetic image size must be positive");

    const auto styles = class_styles(n_classes, difficulty);
    const Jitter jit = jitter_for(difficulty);
    const int per_class = spec.total();

    std::vector<std::string> classes;
    for (int c = 0; c < n_classes; ++c) classes.push_back(class_name(c, n_classes));

    std::vector<ImageSample> samples(static_cast<std::size_t>(n_classes) * per_class);
    const int total = static_cast<int>(samples.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < total; ++i) {
        const int c = i / per_class;
        const int k = i % per_class;
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)));
        ImageSample& s = samples[i];
        s.image = render_flame(styles[c], jit, opts.width, opts.height, rng);
        s.class_id = c;
        s.split = k < spec.train ? Split::train : (k < spec.train + spec.validation ? Split::validation : Split::test);
        std::string num = std::to_string(k);
        s.source_id = classes[c] + "_" + std::string(num.size() < 4 ? 4 - num.size() : 0, '0') + num;
    }
    return Dataset(std::move(classes), std::move(samples), spec);
}

// ---------------------------------------------------------------------------
// Directory datasets

namespace {

std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

std::string sanitize(std::string id) {
    for (char& ch : id)
        if (ch == '/' || ch == '\\') ch = '_';
    return id;
}

} // namespace

Dataset load_dataset(const fs::path& root, const SplitSpec& spec, std::uint64_t seed) {
    return load_dataset(root, spec, seed, {});
}

Dataset load_dataset(const fs::path& root, const SplitSpec& spec, std::uint64_t seed,
                     std::span<const std::string> expected_classes) {
    if (!fs::is_directory(root)) throw StructuralError("dataset root is not a directory: " + root.string());
    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) classes.push_back(entry.path().filename().string());
    std::sort(classes.begin(), classes.end());
    for (const auto& name : expected_classes)
        if (std::find(classes.begin(), classes.end(), name) == classes.end())
            throw StructuralError("missing class directory: " + name);
    if (classes.empty()) throw StructuralError("no class directories under " + root.string());

    struct Pick {
        fs::path file;
        int class_id;
        Split split;
    };
    std::vector<Pick> picks;
    Rng rng(seed);
    const int need = spec.total();
    for (int c = 0; c < static_cast<int>(classes.size()); ++c) {
        auto files = list_images(root / classes[c]);
        const int have = static_cast<int>(files.size());
        if (have < need)
            throw CapacityError("class " + classes[c] + " has " + std::to_string(have) + " images, needs " +
                                std::to_string(need) + " (short by " + std::to_string(need - have) + ")");
        rng.shuffle(files);
        for (int k = 0; k < need; ++k) {
            const Split split = k < spec.train ? Split::train
                              : k < spec.train + spec.validation ? Split::validation : Split::test;
            picks.push_back({files[k], c, split});
        }
    }

    std::vector<ImageSample> samples(picks.size());
    const int n = static_cast<int>(picks.size());
    std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        try {
            samples[i].image = read_image(picks[i].file);
        } catch (const Error& e) {
#pragma omp critical
            failure = e.what();
        }
        samples[i].class_id = picks[i].class_id;
        samples[i].split = picks[i].split;
        samples[i].source_id = classes[picks[i].class_id] + "/" + picks[i].file.filename().string();
    }
    if (!failure.empty()) throw IoError(failure);
    return Dataset(std::move(classes), std::move(samples), spec);
}

bool has_manifest(const fs::path& root) { return fs::is_regular_file(root / "manifest.json"); }

void export_dataset(const Dataset& ds, const fs::path& root, const ManifestInfo& info, bool overwrite) {
    if (fs::exists(root) && !fs::is_empty(root)) {
        if (!overwrite) throw IoError("output path exists and is not empty: " + root.string() + " (use overwrite)");
        if (!has_manifest(root))
            throw IoError("refusing to overwrite " + root.string() + ": not a prepared dataset directory");
        fs::remove_all(root);
    }
    fs::create_directories(root);
    for (const auto& name : ds.classes()) fs::create_directories(root / name);

    nlohmann::json manifest;
    manifest["origin"] = info.origin;
    manifest["seed"] = info.seed;
    manifest["classes"] = ds.classes();
    const auto& spec = ds.split_spec();
    manifest["split_spec"] = {{"train", spec.train}, {"validation", spec.validation}, {"test", spec.test}};
    auto& rows = manifest["samples"] = nlohmann::json::array();
    for (const auto& s : ds.samples()) {
        const std::string file = ds.classes()[s.class_id] + "/" + sanitize(s.source_id) + ".png";
        rows.push_back({{"file", file}, {"class_id", s.class_id}, {"split", to_string(s.split)}, {"source_id", s.source_id}});
    }

    const auto all = ds.samples();
    const int n = static_cast<int>(all.size());
    std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        try {
            write_image(root / rows[i].at("file").get<std::string>(), all[i].image);
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw IoError(failure);

    std::ofstream out(root / "manifest.json");
    if (!out) throw IoError("cannot write manifest in " + root.string());
    out << manifest.dump(1) << '\n';
}

Dataset load_prepared_dataset(const fs::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) throw StructuralError("no manifest.json in " + root.string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed manifest: ") + e.what());
    }
    std::vector<std::string> classes = manifest.at("classes").get<std::vector<std::string>>();
    for (const auto& name : classes)
        if (!fs::is_directory(root / name)) throw StructuralError("missing class directory: " + name);
    SplitSpec spec;
    spec.train = manifest.at("split_spec").at("train");
    spec.validation = manifest.at("split_spec").at("validation");
    spec.test = manifest.at("split_spec").at("test");

    const auto& rows = manifest.at("samples");
    std::vector<ImageSample> samples(rows.size());
    const int n = static_cast<int>(rows.size());
    std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
    for (int i = 0; i < n; ++i) {
        try {
            samples[i].image = read_image(root / rows[i].at("file").get<std::string>());
            samples[i].class_id = rows[i].at("class_id");
            samples[i].split = parse_split(rows[i].at("split").get<std::string>());
            samples[i].source_id = rows[i].at("source_id");
        } catch (const std::exception& e) {
#pragma omp critical
            failure = e.what();
        }
    }
    if (!failure.empty()) throw IoError(failure);
    return Dataset(std::move(classes), std::move(samples), spec);
}

} // namespace fewshot
