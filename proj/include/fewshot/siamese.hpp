#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fewshot/checkpoint.hpp"
#include "fewshot/dataset.hpp"
#include "fewshot/encoder.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/training.hpp"

namespace fewshot {

/// Scores are clamped to [eps, 1 - eps] inside the loss.
inline constexpr double kScoreEpsilon = 1e-7;

/// Mean binary cross-entropy. Throws ArgumentError on length mismatch.
double bce_loss(std::span<const double> scores, std::span<const int> labels);

struct Decision {
    std::size_t sample;  // dataset sample index (bank position for knn_vote)
    int class_id;
    double score;
};

/// The k best-scoring support entries, scores non-increasing.
using DecisionSet = std::vector<Decision>;

struct KnnResult {
    int class_id = -1;
    DecisionSet decisions;
};

/// Top-k by score (equal scores: lower position first), then plurality vote.
/// Vote ties go to the larger summed score, then the lower class_id.
/// Throws ArgumentError for even or out-of-range k, CapacityError if empty.
KnnResult knn_vote(std::span<const double> scores, std::span<const int> classes, int k);

/// Training images after transform_eval, used as the kNN reference set.
struct SupportBank {
    std::vector<Image> images;
    std::vector<int> class_ids;
    std::vector<std::size_t> sample_index;

    std::size_t size() const { return images.size(); }
};

SupportBank build_support_bank(const Dataset& ds, Split split, const TransformConfig& cfg);

/// Shared encoder, |e_a - e_b|, dense(hidden) + ReLU, dense(1), sigmoid.
class SiameseModel {
public:
    static constexpr int default_hidden = 512;

    SiameseModel(const EncoderConfig& cfg, int hidden, std::uint64_t seed);
    explicit SiameseModel(const Checkpoint& ck);

    const Encoder& encoder() const { return encoder_; }
    int hidden() const { return hidden_; }

    /// Score in [0,1] for two input_size images.
    double similarity(const Image& a, const Image& b) const;
    /// Row-wise scores for paired embeddings.
    std::vector<double> score(const Matrix& a, const Matrix& b) const;
    /// Scores for image pairs; consecutive pairs sharing a first image encode it once.
    std::vector<double> score_pairs(std::span<const Image> first, std::span<const Image> second) const;
    /// Scores of one embedding against every row of `bank`.
    std::vector<double> score_against(std::span<const double> e, const Matrix& bank) const;

    struct StepResult {
        double loss = 0.0;
        std::vector<double> scores;
    };
    /// Forward + backward of the BCE loss over a pair batch; adds into the gradients.
    StepResult accumulate_gradients(std::span<const Image> first, std::span<const Image> second,
                                    std::span<const int> labels);

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    void zero_grad();

    std::vector<std::vector<double>> state() const;
    void load_state(const std::vector<std::vector<double>>& state);

    Checkpoint to_checkpoint(const std::vector<std::string>& classes) const;

private:
    std::vector<double> head(const Matrix& diff) const;

    Encoder encoder_;
    int hidden_ = default_hidden;
    Parameter w1_, b1_, w2_, b2_;
};

/// Pairs the test image with every bank image (both encoded by the shared
/// encoder on every call), then votes over the k best scores.
KnnResult knn_classify(const SiameseModel& model, const Image& test_image, const SupportBank& bank, int k,
                       const TransformConfig& cfg);

/// Same decisions as knn_classify for each image, with the bank encoded once.
std::vector<KnnResult> knn_classify_many(const SiameseModel& model, std::span<const Image> test_images,
                                         const SupportBank& bank, int k, const TransformConfig& cfg);

/// Epoch = steps_per_epoch pair batches with an Adam step each, then pair
/// accuracy on fixed validation batches. On return the model holds the
/// weights of the best validation epoch (initial weights if none).
TrainingResult train_siamese(SiameseModel& model, const Dataset& ds, Rng& rng, const TrainOptions& opts,
                             int n_anchors = 15, const ImprovementCallback& on_improvement = {});

/// Fraction of pairs where (score > 0.5) matches the label.
double pair_accuracy(std::span<const double> scores, std::span<const int> labels);

} // namespace fewshot
