#pragma once

#include <cstddef>
#include <vector>

#include "fewshot/dataset.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/transform.hpp"

namespace fewshot {

/// Contrastive pairs. Pair 2i is (anchor i, same-class partner, label 1),
/// pair 2i+1 is (anchor i, other-class partner, label 0).
struct PairBatch {
    std::vector<Image> first;
    std::vector<Image> second;
    std::vector<int> labels;
    std::vector<std::size_t> first_index;   // dataset sample indices
    std::vector<std::size_t> second_index;

    std::size_t size() const { return labels.size(); }
};

/// Draws `n_anchors` anchors with replacement from `split`; every image goes
/// through transform_train. Throws SamplingError if a class has fewer than
/// two samples or there is only one class.
PairBatch sample_pair_batch(const Dataset& ds, Split split, Rng& rng, const TransformConfig& cfg,
                            int n_anchors = 15);

/// Per-class support and query groups, indexed [class_id][k].
struct Episode {
    std::vector<std::vector<Image>> support;
    std::vector<std::vector<Image>> query;
    std::vector<std::vector<std::size_t>> support_index;
    std::vector<std::vector<std::size_t>> query_index;

    int class_count() const { return static_cast<int>(support.size()); }
    std::size_t support_size() const;
    std::size_t query_size() const;
};

/// Support drawn without replacement, then query from the remainder.
/// Throws CapacityError naming the first class that is too small.
Episode sample_episode(const Dataset& ds, Split split, Rng& rng, const TransformConfig& cfg,
                       int n_support = 5, int n_query = 5);

} // namespace fewshot
