#include "fewshot/protonet.hpp"

#include <algorithm>
#include <cmath>

#include "fewshot/error.hpp"

namespace fewshot {

std::string_view to_string(PnLossForm f) { return f == PnLossForm::binary ? "binary" : "categorical"; }

PnLossForm parse_loss_form(std::string_view s) {
    if (s == "binary") return PnLossForm::binary;
    if (s == "categorical") return PnLossForm::categorical;
    throw ConfigError("unknown prototypical loss form: " + std::string(s));
}

PrototypeSet compute_prototypes(std::span<const Matrix> support) {
    if (support.empty()) throw ArgumentError("compute_prototypes: no classes");
    const int dim = support.front().cols;
    PrototypeSet set;
    set.prototypes = Matrix(static_cast<int>(support.size()), dim);
    set.n_per_class = support.front().rows;
    for (std::size_t c = 0; c < support.size(); ++c) {
        const Matrix& group = support[c];
        if (group.rows == 0) throw ArgumentError("compute_prototypes: class " + std::to_string(c) + " has no embeddings");
        if (group.cols != dim) throw ArgumentError("compute_prototypes: embedding widths differ");
        if (group.rows != set.n_per_class) set.n_per_class = 0;
        auto proto = set.prototypes.row(static_cast<int>(c));
        for (int i = 0; i < group.rows; ++i)
            for (int j = 0; j < dim; ++j) proto[j] += group(i, j);
        for (double& v : proto) v /= group.rows;
    }
    return set;
}

std::vector<double> class_distances(std::span<const double> query, const PrototypeSet& protos) {
    if (static_cast<int>(query.size()) != protos.dim()) throw ArgumentError("class_distances: dimension mismatch");
    std::vector<double> d(protos.class_count());
    for (int c = 0; c < protos.class_count(); ++c) {
        double s = 0.0;
        const auto p = protos.prototypes.row(c);
        for (std::size_t j = 0; j < query.size(); ++j) s += (query[j] - p[j]) * (query[j] - p[j]);
        d[c] = std::sqrt(s);
    }
    return d;
}

std::vector<double> class_probabilities(std::span<const double> distances) {
    if (distances.size() < 2) throw ArgumentError("class_probabilities: need at least two classes");
    for (double d : distances)
        if (std::isnan(d)) throw NumericError("class_probabilities: NaN distance");
    const double dmin = *std::min_element(distances.begin(), distances.end());
    std::vector<double> p(distances.size());
    double total = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) total += p[c] = std::exp(-(distances[c] - dmin));
    for (double& v : p) v /= total;
    return p;
}

double pn_loss(std::span<const std::vector<double>> prob_rows, std::span<const int> true_classes, PnLossForm form) {
    if (prob_rows.size() != true_classes.size()) throw ArgumentError("pn_loss: rows and labels differ in length");
    if (prob_rows.empty()) throw ArgumentError("pn_loss: no queries");
    const double eps = kProbabilityEpsilon;
    double total = 0.0;
    for (std::size_t i = 0; i < prob_rows.size(); ++i) {
        const auto& row = prob_rows[i];
        const int y = true_classes[i];
        if (y < 0 || y >= static_cast<int>(row.size())) throw ArgumentError("pn_loss: label outside probability row");
        if (form == PnLossForm::categorical) {
            total += -std::log(std::clamp(row[y], eps, 1.0 - eps));
            continue;
        }
        double q = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            const double p = std::clamp(row[c], eps, 1.0 - eps);
            q += static_cast<int>(c) == y ? -std::log(p) : -std::log(1.0 - p);
        }
        total += q / static_cast<double>(row.size());
    }
    return total / static_cast<double>(prob_rows.size());
}

int argmax_first(std::span<const double> values) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

PnPrediction pn_classify(const Encoder& encoder, const PrototypeSet& protos, const Image& test_image,
                         const TransformConfig& cfg) {
    const Image probe[1] = {transform_eval(test_image, cfg)};
    const Matrix e = encoder.encode(probe);
    PnPrediction out;
    out.probabilities = class_probabilities(class_distances(e.row(0), protos));
    out.class_id = argmax_first(out.probabilities);
    return out;
}

std::vector<PnPrediction> pn_classify_many(const Encoder& encoder, const PrototypeSet& protos,
                                           std::span<const Image> test_images, const TransformConfig& cfg) {
    std::vector<PnPrediction> out;
    out.reserve(test_images.size());
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < test_images.size(); start += chunk) {
        const std::size_t len = std::min(chunk, test_images.size() - start);
        std::vector<Image> probes;
        for (std::size_t i = start; i < start + len; ++i) probes.push_back(transform_eval(test_images[i], cfg));
        const Matrix e = encoder.encode(probes);
        for (int i = 0; i < e.rows; ++i) {
            PnPrediction p;
            p.probabilities = class_probabilities(class_distances(e.row(i), protos));
            p.class_id = argmax_first(p.probabilities);
            out.push_back(std::move(p));
        }
    }
    return out;
}

PrototypeSet build_deployment_prototypes(const Encoder& encoder, const Dataset& ds, Split split,
                                         const TransformConfig& cfg) {
    std::vector<Matrix> support;
    for (const auto& group : ds.by_class(split)) {
        std::vector<Image> images;
        for (std::size_t idx : group) images.push_back(transform_eval(ds.sample(idx).image, cfg));
        support.push_back(encoder.encode(images));
    }
    return compute_prototypes(support);
}

// ---------------------------------------------------------------------------

namespace {

struct EpisodeLayout {
    std::vector<Image> images;         // support (class-major) then query (class-major)
    std::vector<int> support_class;    // per support row
    std::vector<int> query_class;      // per query row
    std::vector<int> support_count;    // per class
    int n_support_rows = 0;
};

EpisodeLayout layout(const Episode& ep) {
    EpisodeLayout l;
    const int m = ep.class_count();
    l.support_count.assign(m, 0);
    for (int c = 0; c < m; ++c)
        for (const Image& img : ep.support[c]) {
            l.images.push_back(img);
            l.support_class.push_back(c);
            ++l.support_count[c];
        }
    l.n_support_rows = static_cast<int>(l.images.size());
    for (int c = 0; c < m; ++c)
        for (const Image& img : ep.query[c]) {
            l.images.push_back(img);
            l.query_class.push_back(c);
        }
    return l;
}

PrototypeSet prototypes_from_rows(const Matrix& emb, const EpisodeLayout& l) {
    std::vector<Matrix> support;
    int row = 0;
    for (int count : l.support_count) {
        Matrix g(count, emb.cols);
        for (int i = 0; i < count; ++i, ++row) std::copy(emb.row(row).begin(), emb.row(row).end(), g.row(i).begin());
        support.push_back(std::move(g));
    }
    return compute_prototypes(support);
}

// Loss, accuracy and (optionally) d(loss)/d(embedding rows) for one episode.
EpisodeResult episode_loss(const Matrix& emb, const EpisodeLayout& l, PnLossForm form, Matrix* grad) {
    const PrototypeSet protos = prototypes_from_rows(emb, l);
    const int m = protos.class_count();
    const int Q = static_cast<int>(l.query_class.size());
    const int dim = emb.cols;
    const double eps = kProbabilityEpsilon;

    EpisodeResult r;
    r.total = Q;
    std::vector<std::vector<double>> rows;
    rows.reserve(Q);
    Matrix grad_proto(m, dim);
    if (grad) *grad = Matrix(emb.rows, dim);

    for (int q = 0; q < Q; ++q) {
        const int qrow = l.n_support_rows + q;
        const int y = l.query_class[q];
        const auto v = emb.row(qrow);
        const auto d = class_distances(v, protos);
        auto p = class_probabilities(d);
        r.correct += argmax_first(p) == y;

        if (grad) {
            // dL/dP, then through softmax(-d) to dL/dd.
            std::vector<double> g(m, 0.0);
            if (form == PnLossForm::binary) {
                const double scale = 1.0 / (static_cast<double>(Q) * m);
                for (int c = 0; c < m; ++c) {
                    if (p[c] < eps || p[c] > 1.0 - eps) continue;
                    g[c] = scale * (c == y ? -1.0 / p[c] : 1.0 / (1.0 - p[c]));
                }
            } else if (p[y] >= eps && p[y] <= 1.0 - eps) {
                g[y] = -1.0 / (p[y] * Q);
            }
            double gp = 0.0;
            for (int c = 0; c < m; ++c) gp += g[c] * p[c];
            for (int k = 0; k < m; ++k) {
                const double dd = -p[k] * (g[k] - gp);
                if (d[k] <= 0.0 || dd == 0.0) continue;
                const auto proto = protos.prototypes.row(k);
                auto gq = grad->row(qrow);
                auto gk = grad_proto.row(k);
                for (int j = 0; j < dim; ++j) {
                    const double u = dd * (v[j] - proto[j]) / d[k];
                    gq[j] += u;
                    gk[j] -= u;
                }
            }
        }
        rows.push_back(std::move(p));
    }
    r.loss = pn_loss(rows, l.query_class, form);

    if (grad) {
        for (int s = 0; s < l.n_support_rows; ++s) {
            const int c = l.support_class[s];
            const double inv = 1.0 / l.support_count[c];
            auto gs = grad->row(s);
            const auto gk = grad_proto.row(c);
            for (int j = 0; j < dim; ++j) gs[j] += gk[j] * inv;
        }
    }
    return r;
}

} // namespace

EpisodeResult pn_accumulate_gradients(Encoder& encoder, const Episode& ep, PnLossForm form) {
    const EpisodeLayout l = layout(ep);
    EncoderTrace trace;
    const Matrix emb = encoder.forward(encoder.to_batch(l.images), trace);
    Matrix grad;
    const EpisodeResult r = episode_loss(emb, l, form, &grad);
    encoder.backward(trace, grad);
    return r;
}

EpisodeResult pn_evaluate_episode(const Encoder& encoder, const Episode& ep, PnLossForm form) {
    const EpisodeLayout l = layout(ep);
    return episode_loss(encoder.encode(l.images), l, form, nullptr);
}

TrainingResult train_protonet(Encoder& encoder, const Dataset& ds, Rng& rng, const TrainOptions& opts, int n_support,
                              int n_query, PnLossForm form, const ImprovementCallback& on_improvement) {
    if (opts.epochs < 0 || opts.steps_per_epoch < 1) throw ConfigError("epochs must be >= 0 and steps_per_epoch >= 1");
    if (ds.class_count() < 2) throw ConfigError("prototypical training needs at least two classes");
    TrainingResult result;
    auto snapshot = [&] {
        std::vector<std::vector<double>> s;
        for (const Parameter* p : std::as_const(encoder).parameters()) s.push_back(p->value);
        return s;
    };
    auto best_state = snapshot();
    if (opts.epochs == 0) return result;

    std::vector<Episode> val_episodes;
    Rng val_rng(opts.validation_seed);
    for (int s = 0; s < opts.steps_per_epoch; ++s)
        val_episodes.push_back(sample_episode(ds, Split::validation, val_rng, opts.transform, n_support, n_query));

    Adam adam(encoder.parameters(), opts.optimizer);
    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        double loss_sum = 0.0;
        int correct = 0, total = 0;
        for (int s = 0; s < opts.steps_per_epoch; ++s) {
            const Episode ep = sample_episode(ds, Split::train, rng, opts.transform, n_support, n_query);
            adam.zero_grad();
            const EpisodeResult r = pn_accumulate_gradients(encoder, ep, form);
            adam.step();
            loss_sum += r.loss;
            correct += r.correct;
            total += r.total;
        }
        int val_correct = 0, val_total = 0;
        for (const Episode& ep : val_episodes) {
            const EpisodeResult r = pn_evaluate_episode(encoder, ep, form);
            val_correct += r.correct;
            val_total += r.total;
        }
        EpochRecord rec{epoch, static_cast<double>(correct) / total, static_cast<double>(val_correct) / val_total,
                        loss_sum / opts.steps_per_epoch};
        result.log.push_back(rec);
        if (rec.val_acc > result.best_val_acc) {
            result.best_val_acc = rec.val_acc;
            result.best_epoch = epoch;
            best_state = snapshot();
            if (on_improvement) on_improvement(rec);
        }
    }
    auto params = encoder.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_state[i];
    return result;
}

Checkpoint protonet_checkpoint(const Encoder& encoder, const PrototypeSet& protos, const std::vector<std::string>& classes) {
    Checkpoint ck;
    ck.algorithm = "pn";
    ck.encoder = encoder.config();
    ck.model_seed = encoder.seed();
    ck.classes = classes;
    for (const Parameter* p : encoder.parameters()) ck.put(p->name, p->value);
    ck.meta["prototype_classes"] = protos.class_count();
    ck.meta["prototype_n"] = protos.n_per_class;
    ck.put("prototypes", protos.prototypes.data);
    return ck;
}

Encoder encoder_from_checkpoint(const Checkpoint& ck) {
    EncoderConfig cfg = ck.encoder;
    cfg.pretrained = false;
    Encoder enc(cfg, ck.model_seed);
    for (Parameter* p : enc.parameters()) {
        const auto& data = ck.tensor(p->name);
        if (data.size() != p->value.size()) throw ConfigError("checkpoint tensor " + p->name + " has wrong size");
        p->value = data;
    }
    return enc;
}

PrototypeSet prototypes_from_checkpoint(const Checkpoint& ck) {
    if (ck.algorithm != "pn") throw ConfigError("checkpoint holds a '" + ck.algorithm + "' model, not pn");
    PrototypeSet set;
    const int m = ck.meta.at("prototype_classes");
    const auto& data = ck.tensor("prototypes");
    if (m <= 0 || data.size() != static_cast<std::size_t>(m) * ck.encoder.embedding_dim)
        throw ConfigError("checkpoint prototypes have wrong size");
    set.prototypes = Matrix(m, ck.encoder.embedding_dim);
    set.prototypes.data = data;
    set.n_per_class = ck.meta.at("prototype_n");
    return set;
}

} // namespace fewshot
