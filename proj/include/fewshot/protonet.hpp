#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "fewshot/checkpoint.hpp"
#include "fewshot/dataset.hpp"
#include "fewshot/encoder.hpp"
#include "fewshot/sampling.hpp"
#include "fewshot/training.hpp"

namespace fewshot {

inline constexpr double kProbabilityEpsilon = 1e-7;

/// `binary`: -[y log P + (1-y) log(1-P)] averaged over every (query, class)
/// term. `categorical`: the usual -log P(true class) averaged over queries.
enum class PnLossForm { binary, categorical };

std::string_view to_string(PnLossForm f);
PnLossForm parse_loss_form(std::string_view s);

/// One mean embedding per class, row c = class c.
struct PrototypeSet {
    Matrix prototypes;
    int n_per_class = 0;  // support size used, 0 if it varied by class

    int class_count() const { return prototypes.rows; }
    int dim() const { return prototypes.cols; }
};

/// Class c's prototype is the arithmetic mean of support[c]'s rows.
/// Throws ArgumentError on an empty class or mismatched widths.
PrototypeSet compute_prototypes(std::span<const Matrix> support);

/// Euclidean distance from `query` to each prototype.
std::vector<double> class_distances(std::span<const double> query, const PrototypeSet& protos);

/// softmax(-d), shifted by the minimum distance. Throws NumericError on NaN.
std::vector<double> class_probabilities(std::span<const double> distances);

double pn_loss(std::span<const std::vector<double>> prob_rows, std::span<const int> true_classes,
               PnLossForm form = PnLossForm::binary);

/// Index of the largest value, lowest index on ties.
int argmax_first(std::span<const double> values);

struct PnPrediction {
    int class_id = -1;
    std::vector<double> probabilities;
};

/// transform_eval, encode, nearest prototype.
PnPrediction pn_classify(const Encoder& encoder, const PrototypeSet& protos, const Image& test_image,
                         const TransformConfig& cfg);
std::vector<PnPrediction> pn_classify_many(const Encoder& encoder, const PrototypeSet& protos,
                                           std::span<const Image> test_images, const TransformConfig& cfg);

/// Prototypes from every image of `split` after transform_eval.
PrototypeSet build_deployment_prototypes(const Encoder& encoder, const Dataset& ds, Split split,
                                         const TransformConfig& cfg);

struct EpisodeResult {
    double loss = 0.0;
    int correct = 0;
    int total = 0;
};

/// Forward + backward of the episode loss; adds into encoder gradients.
EpisodeResult pn_accumulate_gradients(Encoder& encoder, const Episode& ep, PnLossForm form);
/// Loss and query accuracy without gradients.
EpisodeResult pn_evaluate_episode(const Encoder& encoder, const Episode& ep, PnLossForm form);

/// Epoch = steps_per_epoch episodes with an Adam step each, then query
/// accuracy on fixed validation episodes. On return the encoder holds the
/// weights of the best validation epoch (initial weights if none).
TrainingResult train_protonet(Encoder& encoder, const Dataset& ds, Rng& rng, const TrainOptions& opts,
                              int n_support = 5, int n_query = 5, PnLossForm form = PnLossForm::binary,
                              const ImprovementCallback& on_improvement = {});

Checkpoint protonet_checkpoint(const Encoder& encoder, const PrototypeSet& protos,
                               const std::vector<std::string>& classes);
Encoder encoder_from_checkpoint(const Checkpoint& ck);
PrototypeSet prototypes_from_checkpoint(const Checkpoint& ck);

} // namespace fewshot
