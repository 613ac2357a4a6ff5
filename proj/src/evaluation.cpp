#include "fewshot/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "fewshot/error.hpp"

namespace fewshot {

long ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }

long ConfusionMatrix::row_sum(int truth) const {
    long s = 0;
    for (int p = 0; p < m; ++p) s += at(truth, p);
    return s;
}

long ConfusionMatrix::col_sum(int pred) const {
    long s = 0;
    for (int t = 0; t < m; ++t) s += at(t, pred);
    return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truths, int m) {
    if (predictions.size() != truths.size()) throw ArgumentError("confusion_matrix: length mismatch");
    if (m <= 0) throw ArgumentError("confusion_matrix: class count must be positive");
    ConfusionMatrix cm(m);
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (truths[i] < 0 || truths[i] >= m || predictions[i] < 0 || predictions[i] >= m)
            throw ArgumentError("confusion_matrix: label outside [0, " + std::to_string(m) + ")");
        ++cm.at(truths[i], predictions[i]);
    }
    return cm;
}

ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int c) {
    if (c < 0 || c >= cm.m) throw ArgumentError("per_class_metrics: class out of range");
    const long n = cm.total();
    if (n == 0) throw ArgumentError("per_class_metrics: empty confusion matrix");
    const double tp = static_cast<double>(cm.at(c, c));
    const double fn = static_cast<double>(cm.row_sum(c)) - tp;
    const double fp = static_cast<double>(cm.col_sum(c)) - tp;
    const double tn = static_cast<double>(n) - tp - fn - fp;

    ClassMetrics r;
    r.accuracy = (tp + tn) / (tp + tn + fp + fn);
    r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

MetricsReport macro_metrics(const ConfusionMatrix& cm) {
    MetricsReport report;
    for (int c = 0; c < cm.m; ++c) {
        const ClassMetrics k = per_class_metrics(cm, c);
        report.per_class.push_back(k);
        report.macro.accuracy += k.accuracy;
        report.macro.precision += k.precision;
        report.macro.recall += k.recall;
        report.macro.f1 += k.f1;
    }
    report.macro.accuracy /= cm.m;
    report.macro.precision /= cm.m;
    report.macro.recall /= cm.m;
    report.macro.f1 /= cm.m;
    return report;
}

SpeedReport make_speed_report(double total_ms, int n_frames) {
    if (n_frames <= 0) throw ArgumentError("speed report needs at least one frame");
    SpeedReport r;
    r.total_ms = total_ms;
    r.n_frames = n_frames;
    r.per_frame_ms = total_ms / n_frames;
    r.fps = 1000.0 / r.per_frame_ms;
    return r;
}

SpeedReport benchmark_inference(const std::function<int(const Image&)>& classify, std::span<const Image> frames) {
    if (frames.empty()) throw ArgumentError("benchmark_inference: no frames");
    volatile int sink = 0;
    const auto start = std::chrono::steady_clock::now();
    for (const Image& frame : frames) sink = sink + classify(frame);
    const auto stop = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
    return make_speed_report(ms, static_cast<int>(frames.size()));
}

void export_embeddings(const Encoder& encoder, const Dataset& ds, const TransformConfig& cfg,
                       const std::filesystem::path& out) {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& sa = ds.sample(a);
        const auto& sb = ds.sample(b);
        return std::tie(sa.split, sa.class_id, sa.source_id) < std::tie(sb.split, sb.class_id, sb.source_id);
    });

    std::ofstream file(out, std::ios::trunc);
    if (!file) throw IoError("cannot write embeddings: " + out.string());
    file << "source_id,split,class_id";
    for (int j = 0; j < encoder.embedding_dim(); ++j) file << ",e" << j;
    file << '\n';

    constexpr std::size_t chunk = 64;
    char buf[32];
    for (std::size_t start = 0; start < order.size(); start += chunk) {
        const std::size_t len = std::min(chunk, order.size() - start);
        std::vector<Image> images;
        for (std::size_t i = start; i < start + len; ++i) images.push_back(transform_eval(ds.sample(order[i]).image, cfg));
        const Matrix emb = encoder.encode(images);
        for (std::size_t i = 0; i < len; ++i) {
            const auto& s = ds.sample(order[start + i]);
            file << s.source_id << ',' << to_string(s.split) << ',' << s.class_id;
            for (double v : emb.row(static_cast<int>(i))) {
                std::snprintf(buf, sizeof(buf), ",%.17g", v);
                file << buf;
            }
            file << '\n';
        }
    }
    if (!file) throw IoError("failed writing embeddings: " + out.string());
}

nlohmann::ordered_json evaluation_report_json(const ConfusionMatrix& cm, const MetricsReport& metrics,
                                              const std::vector<std::string>& classes) {
    auto metric_obj = [](const ClassMetrics& k) {
        nlohmann::ordered_json j;
        j["precision"] = k.precision;
        j["accuracy"] = k.accuracy;
        j["recall"] = k.recall;
        j["f1"] = k.f1;
        return j;
    };
    nlohmann::ordered_json j;
    j["classes"] = classes;
    j["n_predictions"] = cm.total();
    auto& per_class = j["per_class"] = nlohmann::ordered_json::array();
    for (int c = 0; c < cm.m; ++c) {
        auto row = metric_obj(metrics.per_class[c]);
        row["class_id"] = c;
        per_class.push_back(row);
    }
    j["macro"] = metric_obj(metrics.macro);
    auto& grid = j["confusion_matrix"] = nlohmann::ordered_json::array();
    for (int t = 0; t < cm.m; ++t) {
        std::vector<long> row(cm.counts.begin() + static_cast<std::ptrdiff_t>(t) * cm.m,
                              cm.counts.begin() + static_cast<std::ptrdiff_t>(t + 1) * cm.m);
        grid.push_back(row);
    }
    return j;
}

std::string evaluation_report_text(const ConfusionMatrix& cm, const MetricsReport& metrics,
                                   const std::vector<std::string>& classes) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s %10s\n", "class", "precision", "accuracy", "recall", "f1");
    os << line;
    for (int c = 0; c < cm.m; ++c) {
        const auto& k = metrics.per_class[c];
        std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %10.4f %10.4f\n",
                      c < static_cast<int>(classes.size()) ? classes[c].c_str() : "?", k.precision, k.accuracy,
                      k.recall, k.f1);
        os << line;
    }
    const auto& k = metrics.macro;
    std::snprintf(line, sizeof(line), "%-16s %10.4f %10.4f %10.4f %10.4f\n\n", "macro", k.precision, k.accuracy,
                  k.recall, k.f1);
    os << line << "confusion matrix (rows: true, columns: predicted)\n";
    for (int t = 0; t < cm.m; ++t) {
        for (int p = 0; p < cm.m; ++p) {
            std::snprintf(line, sizeof(line), "%6ld", cm.at(t, p));
            os << line;
        }
        os << '\n';
    }
    return os.str();
}

} // namespace fewshot
