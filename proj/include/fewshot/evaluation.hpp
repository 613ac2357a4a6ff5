#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fewshot/dataset.hpp"
#include "fewshot/encoder.hpp"
#include "fewshot/transform.hpp"

namespace fewshot {

/// counts[t][p]: samples of true class t predicted as p.
struct ConfusionMatrix {
    int m = 0;
    std::vector<long> counts;

    explicit ConfusionMatrix(int classes = 0) : m(classes), counts(static_cast<std::size_t>(classes) * classes, 0) {}

    long at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * m + pred]; }
    long& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * m + pred]; }
    long total() const;
    long row_sum(int truth) const;
    long col_sum(int pred) const;
};

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> truths, int m);

struct ClassMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// One-vs-rest counts for class c. P, R and F1 are 0 when their denominator is 0.
ClassMetrics per_class_metrics(const ConfusionMatrix& cm, int c);

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;  // unweighted mean over classes
};

MetricsReport macro_metrics(const ConfusionMatrix& cm);

struct SpeedReport {
    double total_ms = 0.0;
    double per_frame_ms = 0.0;
    double fps = 0.0;
    int n_frames = 0;
};

/// Derives per-frame time and FPS from a measured total.
SpeedReport make_speed_report(double total_ms, int n_frames);

/// Times `classify` over the frames one by one, strictly in order.
/// The classifier must be fully loaded before the call.
SpeedReport benchmark_inference(const std::function<int(const Image&)>& classify, std::span<const Image> frames);

/// CSV with header `source_id,split,class_id,e0,...`; rows sorted by
/// (split, class_id, source_id). Embeddings of transform_eval images.
void export_embeddings(const Encoder& encoder, const Dataset& ds, const TransformConfig& cfg,
                       const std::filesystem::path& out);

/// Structured evaluation output (per-class table, macro row, confusion grid).
nlohmann::ordered_json evaluation_report_json(const ConfusionMatrix& cm, const MetricsReport& metrics,
                                              const std::vector<std::string>& classes);
std::string evaluation_report_text(const ConfusionMatrix& cm, const MetricsReport& metrics,
                                   const std::vector<std::string>& classes);

} // namespace fewshot
