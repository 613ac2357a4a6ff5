#include <doctest.h>

#include <set>

#include "fewshot/error.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/sampling.hpp"
#include "support.hpp"

using namespace fewshot;

TEST_CASE("pair batch layout and labels") {
    const Dataset ds = test::tiny_dataset(3);
    const auto cfg = test::tiny_transform();
    Rng rng(1);
    for (int draw = 0; draw < 50; ++draw) {
        const PairBatch b = sample_pair_batch(ds, Split::train, rng, cfg, 15);
        REQUIRE(b.size() == 30);
        for (std::size_t i = 0; i < b.size(); ++i) {
            const auto& a = ds.sample(b.first_index[i]);
            const auto& o = ds.sample(b.second_index[i]);
            CHECK(a.split == Split::train);
            CHECK(o.split == Split::train);
            CHECK(b.labels[i] == (i % 2 == 0 ? 1 : 0));
            CHECK(b.labels[i] == (a.class_id == o.class_id ? 1 : 0));
            CHECK(b.first_index[i] != b.second_index[i]);
            CHECK(b.first[i].height == cfg.input_size);
        }
        for (std::size_t i = 0; i < b.size(); i += 2) {
            CHECK(b.first_index[i] == b.first_index[i + 1]);
            CHECK(b.first[i] == b.first[i + 1]);
        }
    }
}

TEST_CASE("anchors eventually cover the whole split") {
    const Dataset ds = test::tiny_dataset(3);
    Rng rng(2);
    std::set<std::size_t> seen;
    int batches = 0;
    while (seen.size() < ds.count(Split::train) && batches < 200) {
        const PairBatch b = sample_pair_batch(ds, Split::train, rng, test::tiny_transform(), 15);
        seen.insert(b.first_index.begin(), b.first_index.end());
        ++batches;
    }
    CHECK(seen.size() == ds.count(Split::train));
}

TEST_CASE("pair sampling needs two classes with two samples") {
    const Dataset one_class = generate_synthetic_dataset(2, SplitSpec{1, 0, 0}, Difficulty::easy, 1);
    Rng rng(1);
    CHECK_THROWS_AS(sample_pair_batch(one_class, Split::train, rng, test::tiny_transform()), SamplingError);
}

TEST_CASE("pair batches repeat under a seed") {
    const Dataset ds = test::tiny_dataset(3);
    Rng a(7), b(7);
    const PairBatch x = sample_pair_batch(ds, Split::train, a, test::tiny_transform());
    const PairBatch y = sample_pair_batch(ds, Split::train, b, test::tiny_transform());
    CHECK(x.first_index == y.first_index);
    CHECK(x.second_index == y.second_index);
    CHECK(x.first == y.first);
}

TEST_CASE("episodes have disjoint support and query per class") {
    const Dataset ds = test::tiny_dataset(3);
    Rng rng(3);
    for (int draw = 0; draw < 50; ++draw) {
        const Episode ep = sample_episode(ds, Split::train, rng, test::tiny_transform(), 3, 2);
        REQUIRE(ep.class_count() == 3);
        CHECK(ep.support_size() == 9);
        CHECK(ep.query_size() == 6);
        for (int c = 0; c < 3; ++c) {
            std::set<std::size_t> s(ep.support_index[c].begin(), ep.support_index[c].end());
            CHECK(s.size() == 3);
            for (std::size_t q : ep.query_index[c]) CHECK(s.count(q) == 0);
            for (std::size_t i : ep.support_index[c]) CHECK(ds.sample(i).class_id == c);
            for (std::size_t i : ep.query_index[c]) CHECK(ds.sample(i).class_id == c);
        }
    }
}

TEST_CASE("episode capacity error names the class") {
    const Dataset ds = test::tiny_dataset(3);
    Rng rng(1);
    try {
        sample_episode(ds, Split::validation, rng, test::tiny_transform(), 3, 2);
        FAIL("expected CapacityError");
    } catch (const CapacityError& e) {
        CHECK(std::string(e.what()).find("class_01") != std::string::npos);
    }
}
