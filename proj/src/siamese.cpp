#include "fewshot/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewshot/error.hpp"
#include "fewshot/kernels.hpp"
#include "fewshot/sampling.hpp"

namespace fewshot {

double bce_loss(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ArgumentError("bce_loss: scores and labels differ in length");
    if (scores.empty()) throw ArgumentError("bce_loss: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = std::clamp(scores[i], kScoreEpsilon, 1.0 - kScoreEpsilon);
        total += labels[i] ? -std::log(s) : -std::log(1.0 - s);
    }
    return total / static_cast<double>(scores.size());
}

double pair_accuracy(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size() || scores.empty()) throw ArgumentError("pair_accuracy: bad lengths");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) hits += (scores[i] > 0.5) == (labels[i] == 1);
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

KnnResult knn_vote(std::span<const double> scores, std::span<const int> classes, int k) {
    if (scores.size() != classes.size()) throw ArgumentError("knn: scores and classes differ in length");
    if (k <= 0 || k % 2 == 0) throw ArgumentError("knn: k must be a positive odd number");
    if (scores.empty()) throw CapacityError("knn: empty support set");
    if (static_cast<std::size_t>(k) > scores.size()) throw ArgumentError("knn: k exceeds support set size");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });

    KnnResult result;
    for (int i = 0; i < k; ++i) result.decisions.push_back({order[i], classes[order[i]], scores[order[i]]});

    struct Tally {
        int votes = 0;
        double score = 0.0;
    };
    const int max_class = *std::max_element(classes.begin(), classes.end());
    std::vector<Tally> tally(static_cast<std::size_t>(max_class) + 1);
    for (const auto& d : result.decisions) {
        ++tally[d.class_id].votes;
        tally[d.class_id].score += d.score;
    }
    int best = -1;
    for (int c = 0; c <= max_class; ++c) {
        if (tally[c].votes == 0) continue;
        if (best < 0 || tally[c].votes > tally[best].votes ||
            (tally[c].votes == tally[best].votes && tally[c].score > tally[best].score))
            best = c;
    }
    result.class_id = best;
    return result;
}

SupportBank build_support_bank(const Dataset& ds, Split split, const TransformConfig& cfg) {
    SupportBank bank;
    for (std::size_t idx : ds.indices(split)) {
        bank.images.push_back(transform_eval(ds.sample(idx).image, cfg));
        bank.class_ids.push_back(ds.sample(idx).class_id);
        bank.sample_index.push_back(idx);
    }
    return bank;
}

// ---------------------------------------------------------------------------

SiameseModel::SiameseModel(const EncoderConfig& cfg, int hidden, std::uint64_t seed)
    : encoder_(cfg, seed), hidden_(hidden) {
    if (hidden <= 0) throw ConfigError("siamese hidden width must be positive");
    const int dim = encoder_.embedding_dim();
    w1_ = Parameter("head.w1", static_cast<std::size_t>(hidden) * dim);
    b1_ = Parameter("head.b1", hidden);
    w2_ = Parameter("head.w2", hidden);
    b2_ = Parameter("head.b2", 1);
    // Head weights use a stream independent of the encoder's.
    Rng rng(seed ^ 0x5a17e5eULL);
    const double s1 = std::sqrt(2.0 / dim), s2 = std::sqrt(1.0 / hidden);
    for (double& w : w1_.value) w = s1 * rng.normal();
    for (double& w : w2_.value) w = s2 * rng.normal();
}

SiameseModel::SiameseModel(const Checkpoint& ck)
    : SiameseModel([&] {
          EncoderConfig cfg = ck.encoder;
          cfg.pretrained = false;  // weights come from the checkpoint itself
          return cfg;
      }(),
                   ck.meta.value("head_hidden", default_hidden), ck.model_seed) {
    if (ck.algorithm != "sn-knn") throw ConfigError("checkpoint holds a '" + ck.algorithm + "' model, not sn-knn");
    for (Parameter* p : parameters()) {
        const auto& data = ck.tensor(p->name);
        if (data.size() != p->value.size()) throw ConfigError("checkpoint tensor " + p->name + " has wrong size");
        p->value = data;
    }
}

std::vector<Parameter*> SiameseModel::parameters() {
    auto params = encoder_.parameters();
    params.insert(params.end(), {&w1_, &b1_, &w2_, &b2_});
    return params;
}

std::vector<const Parameter*> SiameseModel::parameters() const {
    auto params = encoder_.parameters();
    params.insert(params.end(), {&w1_, &b1_, &w2_, &b2_});
    return params;
}

void SiameseModel::zero_grad() {
    for (Parameter* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

std::vector<std::vector<double>> SiameseModel::state() const {
    std::vector<std::vector<double>> out;
    for (const Parameter* p : parameters()) out.push_back(p->value);
    return out;
}

void SiameseModel::load_state(const std::vector<std::vector<double>>& state) {
    auto params = parameters();
    if (state.size() != params.size()) throw ArgumentError("state does not match model");
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = state[i];
}

Checkpoint SiameseModel::to_checkpoint(const std::vector<std::string>& classes) const {
    Checkpoint ck;
    ck.algorithm = "sn-knn";
    ck.encoder = encoder_.config();
    ck.model_seed = encoder_.seed();
    ck.classes = classes;
    ck.meta["head_hidden"] = hidden_;
    for (const Parameter* p : parameters()) ck.put(p->name, p->value);
    return ck;
}

std::vector<double> SiameseModel::head(const Matrix& diff) const {
    Matrix hidden;
    kernels::dense_forward(diff, w1_.value, b1_.value, hidden_, hidden);
    std::vector<double> out(diff.rows);
    for (int i = 0; i < diff.rows; ++i) {
        double z = b2_.value[0];
        for (int j = 0; j < hidden_; ++j) z += w2_.value[j] * std::max(0.0, hidden(i, j));
        out[i] = 1.0 / (1.0 + std::exp(-z));
    }
    return out;
}

std::vector<double> SiameseModel::score(const Matrix& a, const Matrix& b) const {
    if (a.rows != b.rows || a.cols != b.cols || a.cols != encoder_.embedding_dim())
        throw ArgumentError("score: embedding shapes differ");
    Matrix diff(a.rows, a.cols);
    for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] = std::abs(a.data[i] - b.data[i]);
    return head(diff);
}

std::vector<double> SiameseModel::score_against(std::span<const double> e, const Matrix& bank) const {
    if (static_cast<int>(e.size()) != bank.cols || bank.cols != encoder_.embedding_dim())
        throw ArgumentError("score_against: embedding width mismatch");
    Matrix diff(bank.rows, bank.cols);
    for (int i = 0; i < bank.rows; ++i)
        for (int j = 0; j < bank.cols; ++j) diff(i, j) = std::abs(e[j] - bank(i, j));
    return head(diff);
}

double SiameseModel::similarity(const Image& a, const Image& b) const {
    const Image pair[2] = {a, b};
    const Matrix e = encoder_.encode(pair);
    Matrix second(1, e.cols);
    std::copy(e.row(1).begin(), e.row(1).end(), second.data.begin());
    return score_against(e.row(0), second)[0];
}

namespace {

// Unique images of a pair batch and, per pair, the rows of its two members.
struct PairRows {
    std::vector<Image> images;
    std::vector<int> a, b;
};

PairRows pair_rows(std::span<const Image> first, std::span<const Image> second) {
    if (first.size() != second.size() || first.empty()) throw ArgumentError("pair batch sizes differ");
    PairRows r;
    r.a.resize(first.size());
    r.b.resize(first.size());
    for (std::size_t p = 0; p < first.size(); ++p) {
        if (p > 0 && first[p] == first[p - 1]) {
            r.a[p] = r.a[p - 1];
        } else {
            r.a[p] = static_cast<int>(r.images.size());
            r.images.push_back(first[p]);
        }
        r.b[p] = static_cast<int>(r.images.size());
        r.images.push_back(second[p]);
    }
    return r;
}

} // namespace

std::vector<double> SiameseModel::score_pairs(std::span<const Image> first, std::span<const Image> second) const {
    const PairRows rows = pair_rows(first, second);
    const Matrix emb = encoder_.encode(rows.images);
    Matrix diff(static_cast<int>(first.size()), emb.cols);
    for (int p = 0; p < diff.rows; ++p)
        for (int j = 0; j < emb.cols; ++j) diff(p, j) = std::abs(emb(rows.a[p], j) - emb(rows.b[p], j));
    return head(diff);
}

SiameseModel::StepResult SiameseModel::accumulate_gradients(std::span<const Image> first, std::span<const Image> second,
                                                            std::span<const int> labels) {
    const std::size_t P = labels.size();
    if (first.size() != P) throw ArgumentError("pair batch sizes differ");

    const PairRows rows = pair_rows(first, second);
    const std::vector<int>& ia = rows.a;
    const std::vector<int>& ib = rows.b;

    EncoderTrace trace;
    const Matrix emb = encoder_.forward(encoder_.to_batch(rows.images), trace);
    const int dim = emb.cols;

    Matrix diff(static_cast<int>(P), dim);
    for (std::size_t p = 0; p < P; ++p)
        for (int j = 0; j < dim; ++j) diff(static_cast<int>(p), j) = std::abs(emb(ia[p], j) - emb(ib[p], j));

    Matrix pre;
    kernels::dense_forward(diff, w1_.value, b1_.value, hidden_, pre);
    StepResult result;
    result.scores.resize(P);
    std::vector<double> dz(P);
    for (std::size_t p = 0; p < P; ++p) {
        double z = b2_.value[0];
        for (int j = 0; j < hidden_; ++j) z += w2_.value[j] * std::max(0.0, pre(static_cast<int>(p), j));
        const double s = 1.0 / (1.0 + std::exp(-z));
        result.scores[p] = s;
        // d(clamped BCE)/dz; zero where the clamp is active
        const bool clamped = s < kScoreEpsilon || s > 1.0 - kScoreEpsilon;
        dz[p] = clamped ? 0.0 : (s - labels[p]) / static_cast<double>(P);
    }
    result.loss = bce_loss(result.scores, labels);

    Matrix grad_pre(static_cast<int>(P), hidden_);
    for (std::size_t p = 0; p < P; ++p) {
        b2_.grad[0] += dz[p];
        for (int j = 0; j < hidden_; ++j) {
            const double h = pre(static_cast<int>(p), j);
            if (h > 0.0) {
                w2_.grad[j] += dz[p] * h;
                grad_pre(static_cast<int>(p), j) = dz[p] * w2_.value[j];
            }
        }
    }
    Matrix grad_diff;
    kernels::dense_backward(diff, w1_.value, grad_pre, &grad_diff, w1_.grad, b1_.grad);

    Matrix grad_emb(emb.rows, dim);
    for (std::size_t p = 0; p < P; ++p)
        for (int j = 0; j < dim; ++j) {
            const double d = emb(ia[p], j) - emb(ib[p], j);
            const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
            const double g = grad_diff(static_cast<int>(p), j) * sign;
            grad_emb(ia[p], j) += g;
            grad_emb(ib[p], j) -= g;
        }
    encoder_.backward(trace, grad_emb);
    return result;
}

// ---------------------------------------------------------------------------

namespace {

Matrix bank_embeddings(const SiameseModel& model, const SupportBank& bank) { return model.encoder().encode(bank.images); }

KnnResult vote_against(const SiameseModel& model, std::span<const double> test, const Matrix& bank_emb,
                       const SupportBank& bank, int k) {
    const auto scores = model.score_against(test, bank_emb);
    KnnResult r = knn_vote(scores, bank.class_ids, k);
    for (auto& d : r.decisions) d.sample = bank.sample_index[d.sample];
    return r;
}

void check_knn_args(const SupportBank& bank, int k) {
    if (k <= 0 || k % 2 == 0) throw ArgumentError("knn: k must be a positive odd number");
    if (bank.size() == 0) throw CapacityError("knn: empty support set");
    if (static_cast<std::size_t>(k) > bank.size()) throw ArgumentError("knn: k exceeds support set size");
}

} // namespace

KnnResult knn_classify(const SiameseModel& model, const Image& test_image, const SupportBank& bank, int k,
                       const TransformConfig& cfg) {
    check_knn_args(bank, k);
    const Image probe[1] = {transform_eval(test_image, cfg)};
    const Matrix test = model.encoder().encode(probe);
    return vote_against(model, test.row(0), bank_embeddings(model, bank), bank, k);
}

std::vector<KnnResult> knn_classify_many(const SiameseModel& model, std::span<const Image> test_images,
                                         const SupportBank& bank, int k, const TransformConfig& cfg) {
    check_knn_args(bank, k);
    const Matrix bank_emb = bank_embeddings(model, bank);
    std::vector<KnnResult> out;
    out.reserve(test_images.size());
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < test_images.size(); start += chunk) {
        const std::size_t len = std::min(chunk, test_images.size() - start);
        std::vector<Image> probes;
        for (std::size_t i = start; i < start + len; ++i) probes.push_back(transform_eval(test_images[i], cfg));
        const Matrix emb = model.encoder().encode(probes);
        for (int i = 0; i < emb.rows; ++i) out.push_back(vote_against(model, emb.row(i), bank_emb, bank, k));
    }
    return out;
}

// ---------------------------------------------------------------------------

TrainingResult train_siamese(SiameseModel& model, const Dataset& ds, Rng& rng, const TrainOptions& opts, int n_anchors,
                             const ImprovementCallback& on_improvement) {
    if (opts.epochs < 0 || opts.steps_per_epoch < 1) throw ConfigError("epochs must be >= 0 and steps_per_epoch >= 1");
    TrainingResult result;
    auto best_state = model.state();
    if (opts.epochs == 0) return result;

    std::vector<PairBatch> val_batches;
    Rng val_rng(opts.validation_seed);
    for (int s = 0; s < opts.steps_per_epoch; ++s)
        val_batches.push_back(sample_pair_batch(ds, Split::validation, val_rng, opts.transform, n_anchors));

    Adam adam(model.parameters(), opts.optimizer);
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        double loss_sum = 0.0;
        std::size_t hits = 0, pairs = 0;
        for (int s = 0; s < opts.steps_per_epoch; ++s) {
            const PairBatch batch = sample_pair_batch(ds, Split::train, rng, opts.transform, n_anchors);
            adam.zero_grad();
            const auto step = model.accumulate_gradients(batch.first, batch.second, batch.labels);
            adam.step();
            loss_sum += step.loss;
            hits += static_cast<std::size_t>(std::lround(pair_accuracy(step.scores, batch.labels) * batch.size()));
            pairs += batch.size();
        }

        std::size_t val_hits = 0, val_pairs = 0;
        for (const PairBatch& vb : val_batches) {
            const auto scores = model.score_pairs(vb.first, vb.second);
            val_hits += static_cast<std::size_t>(std::lround(pair_accuracy(scores, vb.labels) * vb.size()));
            val_pairs += vb.size();
        }

        EpochRecord rec{epoch, static_cast<double>(hits) / pairs, static_cast<double>(val_hits) / val_pairs,
                        loss_sum / opts.steps_per_epoch};
        result.log.push_back(rec);
        if (rec.val_acc > result.best_val_acc) {
            result.best_val_acc = rec.val_acc;
            result.best_epoch = epoch;
            best_state = model.state();
            if (on_improvement) on_improvement(rec);
        }
    }
    model.load_state(best_state);
    return result;
}

} // namespace fewshot
