#include "fewshot/sampling.hpp"

#include <string>

#include "fewshot/error.hpp"

namespace fewshot {

PairBatch sample_pair_batch(const Dataset& ds, Split split, Rng& rng, const TransformConfig& cfg,
                            int n_anchors) {
    if (n_anchors < 1) throw ArgumentError("n_anchors must be >= 1");
    const auto& groups = ds.by_class(split);
    if (groups.size() < 2) throw SamplingError("pair sampling needs at least two classes");
    for (std::size_t c = 0; c < groups.size(); ++c)
        if (groups[c].size() < 2)
            throw SamplingError("class " + ds.classes()[c] + " has fewer than two samples in split " +
                                std::string(to_string(split)));

    const std::vector<std::size_t> pool = ds.indices(split);
    const int m = static_cast<int>(groups.size());

    PairBatch batch;
    const std::size_t n_pairs = 2 * static_cast<std::size_t>(n_anchors);
    batch.first.reserve(n_pairs);
    batch.second.reserve(n_pairs);
    for (int a = 0; a < n_anchors; ++a) {
        const std::size_t anchor = pool[rng.below(pool.size())];
        const int c = ds.sample(anchor).class_id;

        const auto& same = groups[c];
        std::size_t positive;
        do {
            positive = same[rng.below(same.size())];
        } while (positive == anchor);

        int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(m - 1)));
        if (other >= c) ++other;
        const auto& diff = groups[other];
        const std::size_t negative = diff[rng.below(diff.size())];

        Image anchor_img = transform_train(ds.sample(anchor).image, rng, cfg);
        Image pos_img = transform_train(ds.sample(positive).image, rng, cfg);
        Image neg_img = transform_train(ds.sample(negative).image, rng, cfg);

        batch.first.push_back(anchor_img);
        batch.second.push_back(std::move(pos_img));
        batch.labels.push_back(1);
        batch.first_index.push_back(anchor);
        batch.second_index.push_back(positive);

        batch.first.push_back(std::move(anchor_img));
        batch.second.push_back(std::move(neg_img));
        batch.labels.push_back(0);
        batch.first_index.push_back(anchor);
        batch.second_index.push_back(negative);
    }
    return batch;
}

std::size_t Episode::support_size() const {
    std::size_t n = 0;
    for (const auto& g : support) n += g.size();
    return n;
}

std::size_t Episode::query_size() const {
    std::size_t n = 0;
    for (const auto& g : query) n += g.size();
    return n;
}

Episode sample_episode(const Dataset& ds, Split split, Rng& rng, const TransformConfig& cfg, int n_support,
                       int n_query) {
    if (n_support < 1 || n_query < 1) throw ArgumentError("episode needs n_support >= 1 and n_query >= 1");
    const auto& groups = ds.by_class(split);
    const std::size_t need = static_cast<std::size_t>(n_support) + n_query;
    for (std::size_t c = 0; c < groups.size(); ++c)
        if (groups[c].size() < need)
            throw CapacityError("class " + ds.classes()[c] + " has " + std::to_string(groups[c].size()) +
                                " samples in split " + std::string(to_string(split)) + ", episode needs " +
                                std::to_string(need));

    Episode ep;
    const int m = static_cast<int>(groups.size());
    ep.support.resize(m);
    ep.query.resize(m);
    ep.support_index.resize(m);
    ep.query_index.resize(m);
    for (int c = 0; c < m; ++c) {
        std::vector<std::size_t> pool = groups[c];
        // partial Fisher-Yates: the first `need` slots become a uniform draw without replacement
        for (std::size_t i = 0; i < need; ++i) {
            const std::size_t j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        ep.support_index[c].assign(pool.begin(), pool.begin() + n_support);
        ep.query_index[c].assign(pool.begin() + n_support, pool.begin() + static_cast<std::ptrdiff_t>(need));
    }
    for (int c = 0; c < m; ++c) {
        for (std::size_t idx : ep.support_index[c]) ep.support[c].push_back(transform_train(ds.sample(idx).image, rng, cfg));
        for (std::size_t idx : ep.query_index[c]) ep.query[c].push_back(transform_train(ds.sample(idx).image, rng, cfg));
    }
    return ep;
}

} // namespace fewshot
