#include <doctest.h>

#include <cmath>
#include <limits>

#include "fewshot/error.hpp"
#include "fewshot/optimizer.hpp"
#include "fewshot/protonet.hpp"
#include "fewshot/rng.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace fewshot;

TEST_CASE("prototype is the support mean") {
    Matrix a(2, 2), b(1, 2);
    a.data = {1, 2, 3, 6};
    b.data = {-1, 5};
    const std::vector<Matrix> support{a, b};
    const PrototypeSet p = compute_prototypes(support);
    CHECK(p.class_count() == 2);
    CHECK(p.prototypes(0, 0) == 2.0);
    CHECK(p.prototypes(0, 1) == 4.0);
    CHECK(p.prototypes(1, 1) == 5.0);
    CHECK(p.n_per_class == 0);

    const std::vector<Matrix> empty_class{a, Matrix(0, 2)};
    CHECK_THROWS_AS(compute_prototypes(empty_class), ArgumentError);
    const std::vector<Matrix> ragged{a, Matrix(1, 3)};
    CHECK_THROWS_AS(compute_prototypes(ragged), ArgumentError);
}

TEST_CASE("distances and probabilities") {
    PrototypeSet p;
    p.prototypes = Matrix(2, 2);
    p.prototypes.data = {0, 0, 3, 4};
    const std::vector<double> q{0, 0};
    const auto d = class_distances(q, p);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(5.0));

    const std::vector<double> ex{0.0, std::log(2.0)};
    const auto pr = class_probabilities(ex);
    CHECK(pr[0] == doctest::Approx(2.0 / 3.0));
    CHECK(pr[1] == doctest::Approx(1.0 / 3.0));

    const std::vector<double> far{1000.0, 1001.0, 5000.0};
    const auto stable = class_probabilities(far);
    CHECK(stable[0] + stable[1] + stable[2] == doctest::Approx(1.0));
    CHECK(stable[2] == 0.0);

    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(class_probabilities(one), ArgumentError);
    const std::vector<double> nan{1.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(class_probabilities(nan), NumericError);
}

TEST_CASE("loss forms") {
    const std::vector<std::vector<double>> rows{{0.5, 0.3, 0.2}};
    const std::vector<int> truth{1};
    CHECK(pn_loss(rows, truth, PnLossForm::binary) ==
          doctest::Approx(-(std::log(0.5) + std::log(0.3) + std::log(0.8)) / 3.0));
    CHECK(pn_loss(rows, truth, PnLossForm::categorical) == doctest::Approx(-std::log(0.3)));
    CHECK(parse_loss_form("binary") == PnLossForm::binary);
    CHECK(parse_loss_form("categorical") == PnLossForm::categorical);
    CHECK_THROWS(parse_loss_form("hinge"));
}

TEST_CASE("argmax takes the lowest index on ties") {
    const std::vector<double> v{0.2, 0.4, 0.4};
    CHECK(argmax_first(v) == 1);
}

TEST_CASE("pn gradients match finite differences for both loss forms") {
    const Dataset ds = test::tiny_dataset(3);
    for (PnLossForm form : {PnLossForm::binary, PnLossForm::categorical}) {
        CAPTURE(to_string(form));
        Encoder enc(test::tiny_encoder(8, 4), 11);
        Rng rng(12);
        const Episode ep = sample_episode(ds, Split::train, rng, test::tiny_transform(8), 2, 2);
        enc.zero_grad();
        pn_accumulate_gradients(enc, ep, form);
        const auto params = enc.parameters();
        const auto r = test::gradient_check(params, test::snapshot_grads(params),
                                            [&] { return pn_evaluate_episode(enc, ep, form).loss; });
        CHECK(r.max_rel_error <= 1e-3);
    }
}

TEST_CASE("evaluate and accumulate agree on loss and accuracy") {
    const Dataset ds = test::tiny_dataset(3);
    Encoder enc(test::tiny_encoder(), 1);
    Rng rng(2);
    const Episode ep = sample_episode(ds, Split::train, rng, test::tiny_transform(), 3, 3);
    const EpisodeResult a = pn_evaluate_episode(enc, ep, PnLossForm::binary);
    const EpisodeResult b = pn_accumulate_gradients(enc, ep, PnLossForm::binary);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
    CHECK(a.correct == b.correct);
    CHECK(a.total == 9);
}

TEST_CASE("a few small steps lower the pn loss") {
    const Dataset ds = test::tiny_dataset(3);
    Encoder enc(test::tiny_encoder(), 3);
    Rng rng(4);
    const Episode ep = sample_episode(ds, Split::train, rng, test::tiny_transform(), 3, 3);
    AdamSettings s;
    s.learning_rate = 1e-3;
    Adam adam(enc.parameters(), s);
    const double first = pn_evaluate_episode(enc, ep, PnLossForm::binary).loss;
    for (int i = 0; i < 10; ++i) {
        adam.zero_grad();
        pn_accumulate_gradients(enc, ep, PnLossForm::binary);
        adam.step();
    }
    CHECK(pn_evaluate_episode(enc, ep, PnLossForm::binary).loss < first);
}

TEST_CASE("pn_classify picks the nearest prototype") {
    const Dataset ds = test::tiny_dataset(3);
    const auto cfg = test::tiny_transform();
    const Encoder enc(test::tiny_encoder(), 5);
    const PrototypeSet protos = build_deployment_prototypes(enc, ds, Split::train, cfg);
    CHECK(protos.class_count() == 3);
    CHECK(protos.n_per_class == 6);
    std::vector<Image> imgs;
    for (std::size_t i : ds.indices(Split::test)) imgs.push_back(ds.sample(i).image);
    const auto many = pn_classify_many(enc, protos, imgs, cfg);
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const PnPrediction p = pn_classify(enc, protos, imgs[i], cfg);
        CHECK(p.class_id == many[i].class_id);
        const Image x = transform_eval(imgs[i], cfg);
        const Matrix e = enc.encode(std::span(&x, 1));
        CHECK(p.class_id == argmax_first(class_probabilities(class_distances(e.row(0), protos))));
    }
}

TEST_CASE("pn checkpoint round trip") {
    const Dataset ds = test::tiny_dataset(3);
    const auto cfg = test::tiny_transform();
    const Encoder enc(test::tiny_encoder(), 5);
    const PrototypeSet protos = build_deployment_prototypes(enc, ds, Split::train, cfg);
    const Checkpoint ck = protonet_checkpoint(enc, protos, ds.classes());
    const auto path = test::scratch_dir("pn_ck") / "ck.bin";
    save_checkpoint(path, ck);
    const Checkpoint back = load_checkpoint(path);
    const Encoder enc2 = encoder_from_checkpoint(back);
    const PrototypeSet protos2 = prototypes_from_checkpoint(back);
    CHECK(protos2.prototypes == protos.prototypes);
    CHECK(back.classes == ds.classes());
    for (std::size_t i = 0; i < enc.parameters().size(); ++i)
        CHECK(enc.parameters()[i]->value == enc2.parameters()[i]->value);
}

TEST_CASE("pn training is reproducible") {
    const Dataset ds = test::tiny_dataset(3);
    TrainOptions opts;
    opts.epochs = 2;
    opts.steps_per_epoch = 2;
    opts.transform = test::tiny_transform();
    auto run = [&] {
        Encoder enc(test::tiny_encoder(), 1);
        Rng rng(3);
        return train_protonet(enc, ds, rng, opts, 2, 2, PnLossForm::binary).log;
    };
    const TrainingLog a = run();
    CHECK(a == run());
    CHECK(a.size() == 2);
}
