#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fewshot/commands.hpp"
#include "fewshot/evaluation.hpp"
#include "fewshot/protonet.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/sampling.hpp"
#include "fewshot/siamese.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace fewshot;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail.clear();
        pass = false;
        detail += (detail.empty() ? "" : "; ") + why;
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool rel_ok(double got, double want, double rel = 1e-6) {
    return std::abs(got - want) <= rel * std::max(std::abs(want), 1e-300) || got == want;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- 1: math oracles -------------------------------------------------------

Outcome criterion_math() {
    const auto t0 = Clock::now();
    Outcome out;
    Rng rng(101);
    int mismatches = 0;
    const int instances = 200;
    for (int it = 0; it < instances; ++it) {
        const int m = 2 + static_cast<int>(rng.below(5));
        const int dim = 1 + static_cast<int>(rng.below(8));
        std::vector<Matrix> support;
        for (int c = 0; c < m; ++c) {
            Matrix s(1 + static_cast<int>(rng.below(6)), dim);
            for (double& v : s.data) v = rng.uniform(-3, 3);
            support.push_back(s);
        }
        const PrototypeSet protos = compute_prototypes(support);
        std::vector<double> q(dim);
        for (double& v : q) v = rng.uniform(-3, 3);

        // independent brute-force values in long double
        std::vector<long double> d_ref(m), p_ref(m);
        for (int c = 0; c < m; ++c) {
            long double sq = 0;
            for (int j = 0; j < dim; ++j) {
                long double mean = 0;
                for (int r = 0; r < support[c].rows; ++r) mean += support[c](r, j);
                mean /= support[c].rows;
                if (!rel_ok(protos.prototypes(c, j), static_cast<double>(mean))) ++mismatches;
                sq += (q[j] - mean) * (q[j] - mean);
            }
            d_ref[c] = std::sqrt(sq);
        }
        long double z = 0;
        for (int c = 0; c < m; ++c) z += std::exp(-d_ref[c]);
        for (int c = 0; c < m; ++c) p_ref[c] = std::exp(-d_ref[c]) / z;

        const auto d = class_distances(q, protos);
        const auto p = class_probabilities(d);
        for (int c = 0; c < m; ++c) {
            if (!rel_ok(d[c], static_cast<double>(d_ref[c]))) ++mismatches;
            if (!rel_ok(p[c], static_cast<double>(p_ref[c]))) ++mismatches;
        }

        // loss over a random multi-query episode
        const int nq = 1 + static_cast<int>(rng.below(4));
        std::vector<std::vector<double>> rows;
        std::vector<int> truths;
        long double bin = 0, cat = 0;
        for (int k = 0; k < nq; ++k) {
            std::vector<double> dist(m);
            for (double& v : dist) v = rng.uniform(0, 5);
            rows.push_back(class_probabilities(dist));
            truths.push_back(static_cast<int>(rng.below(m)));
            long double zz = 0;
            for (double v : dist) zz += std::exp(-static_cast<long double>(v));
            for (int c = 0; c < m; ++c) {
                const long double pc = std::exp(-static_cast<long double>(dist[c])) / zz;
                bin -= c == truths.back() ? std::log(pc) : std::log(1 - pc);
                if (c == truths.back()) cat -= std::log(pc);
            }
        }
        bin /= static_cast<long double>(nq) * m;
        cat /= nq;
        if (!rel_ok(pn_loss(rows, truths, PnLossForm::binary), static_cast<double>(bin))) ++mismatches;
        if (!rel_ok(pn_loss(rows, truths, PnLossForm::categorical), static_cast<double>(cat))) ++mismatches;

        // metrics from raw label lists, one-vs-rest
        const int n = 5 + static_cast<int>(rng.below(40));
        std::vector<int> pred(n), truth(n);
        for (int i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng.below(m));
            pred[i] = rng.bernoulli(0.6) ? truth[i] : static_cast<int>(rng.below(m));
        }
        const MetricsReport rep = macro_metrics(confusion_matrix(pred, truth, m));
        double macro[4] = {0, 0, 0, 0};
        for (int c = 0; c < m; ++c) {
            double tp = 0, fp = 0, fn = 0, tn = 0;
            for (int i = 0; i < n; ++i) {
                const bool is_p = pred[i] == c, is_t = truth[i] == c;
                tp += is_p && is_t;
                fp += is_p && !is_t;
                fn += !is_p && is_t;
                tn += !is_p && !is_t;
            }
            const double acc = (tp + tn) / (tp + tn + fp + fn);
            const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
            const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
            const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            const ClassMetrics& got = rep.per_class[c];
            if (!rel_ok(got.accuracy, acc) || !rel_ok(got.precision, prec) || !rel_ok(got.recall, rec) ||
                !rel_ok(got.f1, f1))
                ++mismatches;
            macro[0] += acc / m, macro[1] += prec / m, macro[2] += rec / m, macro[3] += f1 / m;
        }
        if (!rel_ok(rep.macro.accuracy, macro[0]) || !rel_ok(rep.macro.precision, macro[1]) ||
            !rel_ok(rep.macro.recall, macro[2]) || !rel_ok(rep.macro.f1, macro[3]))
            ++mismatches;
    }
    const double secs = seconds_since(t0);
    out.detail = fmt("%d random instances, %d mismatches at 1e-6 relative, %.1f s", instances, mismatches, secs);
    if (mismatches > 0) out.fail(fmt("%d mismatches", mismatches));
    if (secs >= 60) out.fail(fmt("took %.1f s", secs));
    return out;
}

// ---- 2: sampler invariants -------------------------------------------------

Outcome criterion_sampler() {
    const auto t0 = Clock::now();
    Outcome out;
    const Dataset ds = generate_synthetic_dataset(6, SplitSpec{20, 0, 0}, Difficulty::easy, 21);
    const TransformConfig cfg;
    Rng rng(22);
    long violations = 0;
    const int draws = 1000;
    for (int d = 0; d < draws; ++d) {
        const PairBatch b = sample_pair_batch(ds, Split::train, rng, cfg, 15);
        int pos = 0, neg = 0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            const int same = ds.sample(b.first_index[i]).class_id == ds.sample(b.second_index[i]).class_id;
            violations += b.labels[i] != same;
            violations += b.first_index[i] == b.second_index[i];
            pos += b.labels[i] == 1;
            neg += b.labels[i] == 0;
        }
        violations += pos != 15 || neg != 15 || b.size() != 30;
    }
    for (int d = 0; d < draws; ++d) {
        const Episode ep = sample_episode(ds, Split::train, rng, cfg, 5, 5);
        violations += ep.class_count() != 6;
        for (int c = 0; c < ep.class_count(); ++c) {
            std::set<std::size_t> s(ep.support_index[c].begin(), ep.support_index[c].end());
            std::set<std::size_t> q(ep.query_index[c].begin(), ep.query_index[c].end());
            violations += s.size() != 5 || q.size() != 5;
            for (std::size_t i : q) violations += s.count(i);
            for (std::size_t i : s) violations += ds.sample(i).class_id != c;
            for (std::size_t i : q) violations += ds.sample(i).class_id != c;
        }
    }
    const double secs = seconds_since(t0);
    out.detail = fmt("%d pair batches + %d episodes, %ld violations, %.1f s", draws, draws, violations, secs);
    if (violations) out.fail(fmt("%ld violations", violations));
    if (secs >= 60) out.fail(fmt("took %.1f s", secs));
    return out;
}

// ---- 3: kNN equivalence ----------------------------------------------------

int oracle_vote(const std::vector<double>& scores, const std::vector<int>& classes, int k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::map<int, std::pair<int, double>> tally;
    for (int i = 0; i < k; ++i) {
        auto& t = tally[classes[order[i]]];
        t.first += 1;
        t.second += scores[order[i]];
    }
    int best = -1;
    std::pair<int, double> best_t{-1, 0};
    for (const auto& [c, t] : tally) {  // ascending class id, so strict > keeps the lowest on full ties
        if (t.first > best_t.first || (t.first == best_t.first && t.second > best_t.second)) {
            best = c;
            best_t = t;
        }
    }
    return best;
}

Outcome criterion_knn() {
    const auto t0 = Clock::now();
    Outcome out;
    Rng rng(31);
    int mismatches = 0, tie_cases = 0;
    const int configs = 200;
    for (int it = 0; it < configs; ++it) {
        const int n = 1 + static_cast<int>(rng.below(40));
        const int m = 1 + static_cast<int>(rng.below(6));
        const int k = 1 + 2 * static_cast<int>(rng.below((n + 1) / 2));
        // coarse score levels force score ties and vote ties
        const int levels = 2 + static_cast<int>(rng.below(6));
        std::vector<double> scores(n);
        std::vector<int> classes(n);
        for (int i = 0; i < n; ++i) {
            scores[i] = static_cast<double>(rng.below(levels)) / levels;
            classes[i] = static_cast<int>(rng.below(m));
        }
        std::set<double> distinct(scores.begin(), scores.end());
        tie_cases += distinct.size() < scores.size();
        if (knn_vote(scores, classes, k).class_id != oracle_vote(scores, classes, k)) ++mismatches;
    }

    // end-to-end knn_classify against pairwise similarity + the same oracle
    const Dataset ds = test::tiny_dataset(4, 33);
    const TransformConfig cfg = test::tiny_transform();
    const SiameseModel model(test::tiny_encoder(), 8, 34);
    const SupportBank bank = build_support_bank(ds, Split::train, cfg);
    int e2e = 0;
    for (std::size_t i : ds.indices(Split::test)) {
        const Image x = transform_eval(ds.sample(i).image, cfg);
        std::vector<double> scores;
        for (const Image& b : bank.images) scores.push_back(model.similarity(x, b));
        for (int k : {1, 3, 5}) {
            ++e2e;
            if (knn_classify(model, ds.sample(i).image, bank, k, cfg).class_id != oracle_vote(scores, bank.class_ids, k))
                ++mismatches;
        }
    }
    const double secs = seconds_since(t0);
    out.detail = fmt("%d score configurations (%d with ties) + %d classifier calls, %d mismatches, %.1f s", configs,
                     tie_cases, e2e, mismatches, secs);
    if (mismatches) out.fail(fmt("%d mismatches", mismatches));
    if (secs >= 60) out.fail(fmt("took %.1f s", secs));
    return out;
}

// ---- 4: gradient check -----------------------------------------------------

Outcome criterion_gradients() {
    const auto t0 = Clock::now();
    Outcome out;
    const Dataset ds = test::tiny_dataset(3, 41);
    const EncoderConfig ecfg = test::tiny_encoder(8, 4);
    const TransformConfig tcfg = test::tiny_transform(8);

    SiameseModel sn(ecfg, 8, 42);
    Rng rng(43);
    const PairBatch batch = sample_pair_batch(ds, Split::train, rng, tcfg, 3);
    sn.zero_grad();
    sn.accumulate_gradients(batch.first, batch.second, batch.labels);
    std::size_t sn_params = 0;
    for (const Parameter* p : sn.parameters()) sn_params += p->value.size();
    const auto sn_r = test::gradient_check(sn.parameters(), test::snapshot_grads(sn.parameters()), [&] {
        return sn.accumulate_gradients(batch.first, batch.second, batch.labels).loss;
    });

    std::string detail = fmt("siamese BCE: %zu params, max rel err %.2e", sn_params, sn_r.max_rel_error);
    if (sn_params > 1000) out.fail("siamese instance too large");
    if (sn_r.max_rel_error > 1e-3) out.fail(fmt("siamese rel err %.2e", sn_r.max_rel_error));

    for (PnLossForm form : {PnLossForm::binary, PnLossForm::categorical}) {
        Encoder enc(ecfg, 44);
        const Episode ep = sample_episode(ds, Split::train, rng, tcfg, 2, 2);
        enc.zero_grad();
        pn_accumulate_gradients(enc, ep, form);
        const auto r = test::gradient_check(enc.parameters(), test::snapshot_grads(enc.parameters()),
                                            [&] { return pn_evaluate_episode(enc, ep, form).loss; });
        detail += fmt("; prototypical %s: %zu params, max rel err %.2e", std::string(to_string(form)).c_str(),
                      enc.parameter_count(), r.max_rel_error);
        if (enc.parameter_count() > 1000) out.fail("encoder instance too large");
        if (r.max_rel_error > 1e-3) out.fail(fmt("%s rel err %.2e", std::string(to_string(form)).c_str(), r.max_rel_error));
    }
    const double secs = seconds_since(t0);
    detail += fmt("; %.1f s", secs);
    if (out.pass) out.detail = detail;
    if (secs >= 300) out.fail(fmt("took %.1f s", secs));
    return out;
}

// ---- 5-8: trained pipelines ------------------------------------------------

RunConfig acceptance_run(Algorithm a, Difficulty d) {
    RunConfig cfg;
    cfg.algorithm = a;
    cfg.synthetic = d;
    cfg.synthetic_classes = 6;
    cfg.split = SplitSpec{20, 20, 400};
    cfg.epochs = a == Algorithm::sn_knn ? 100 : 30;
    cfg.plot = false;
    return cfg;
}

struct PipelineRun {
    TrainingResult train;
    EvalOutcome eval;
};

PipelineRun run_pipeline(const RunConfig& cfg, const fs::path& dir) {
    PipelineRun r;
    r.train = cmd_train(cfg, dir);
    r.eval = cmd_eval(RunInputs{dir});
    return r;
}

double confusable_error_share(const ConfusionMatrix& cm, long& errors) {
    std::set<std::pair<int, int>> pairs;
    for (auto [a, b] : confusable_pairs(cm.m)) {
        pairs.insert({a, b});
        pairs.insert({b, a});
    }
    long in_pairs = 0;
    errors = 0;
    for (int t = 0; t < cm.m; ++t)
        for (int p = 0; p < cm.m; ++p)
            if (t != p) {
                errors += cm.at(t, p);
                if (pairs.count({t, p})) in_pairs += cm.at(t, p);
            }
    return errors ? static_cast<double>(in_pairs) / errors : 0.0;
}

std::string macro_text(const MetricsReport& m) {
    return fmt("P %.4f A %.4f R %.4f F1 %.4f", m.macro.precision, m.macro.accuracy, m.macro.recall, m.macro.f1);
}

struct Pipelines {
    std::map<std::string, PipelineRun> runs;
    double seconds = 0;
};

Pipelines run_all(const fs::path& root) {
    const auto t0 = Clock::now();
    Pipelines p;
    for (Difficulty d : {Difficulty::easy, Difficulty::hard})
        for (Algorithm a : {Algorithm::pn, Algorithm::sn_knn}) {
            const std::string key = std::string(to_string(a)) + "-" + std::string(to_string(d));
            std::printf("  training %s ...\n", key.c_str());
            std::fflush(stdout);
            p.runs[key] = run_pipeline(acceptance_run(a, d), root / key);
        }
    p.seconds = seconds_since(t0);
    return p;
}

Outcome criterion_end_to_end(const Pipelines& p) {
    Outcome out;
    std::string detail;
    for (const char* key : {"pn-easy", "sn-knn-easy"}) {
        const MetricsReport& m = p.runs.at(key).eval.metrics;
        detail += fmt("%s %s; ", key, macro_text(m).c_str());
        for (double v : {m.macro.precision, m.macro.accuracy, m.macro.recall, m.macro.f1})
            if (v < 0.95) {
                out.fail(fmt("%s macro %s below 0.95", key, macro_text(m).c_str()));
                break;
            }
    }
    for (const char* key : {"pn-hard", "sn-knn-hard"}) {
        long errors = 0;
        const double share = confusable_error_share(p.runs.at(key).eval.confusion, errors);
        detail += fmt("%s %ld errors, %.1f%% in overlapping pairs; ", key, errors, 100 * share);
        if (errors == 0) out.fail(fmt("%s made no errors, so no confusion structure to check", key));
        else if (share < 0.60) out.fail(fmt("%s only %.1f%% of errors in overlapping pairs", key, 100 * share));
    }
    detail += fmt("train+eval %.1f min", p.seconds / 60);
    if (p.seconds > 1800) out.fail(fmt("took %.1f min", p.seconds / 60));
    if (out.pass) out.detail = detail;
    return out;
}

Outcome criterion_convergence(const Pipelines& p) {
    Outcome out;
    const int pn = epochs_to_reach(p.runs.at("pn-easy").train.log, 0.95);
    const int sn = epochs_to_reach(p.runs.at("sn-knn-easy").train.log, 0.95);
    out.detail = fmt("epochs to 0.95 training accuracy: PN %d, SN %d", pn, sn);
    if (pn < 0) out.fail("PN never reached 0.95 training accuracy");
    else if (sn >= 0 && pn >= sn) out.fail(fmt("PN %d epochs is not fewer than SN %d", pn, sn));
    return out;
}

Outcome criterion_speed(const fs::path& root) {
    const auto t0 = Clock::now();
    Outcome out;
    const SpeedReport pn = cmd_bench(RunInputs{root / "pn-easy"}, 120);
    const SpeedReport sn = cmd_bench(RunInputs{root / "sn-knn-easy"}, 120);
    const Checkpoint a = load_checkpoint(root / "pn-easy" / kCheckpointFile);
    const Checkpoint b = load_checkpoint(root / "sn-knn-easy" / kCheckpointFile);
    const Dataset ds = resolve_dataset(load_run_config(root / "sn-knn-easy" / kConfigFile));
    const double ratio = sn.per_frame_ms / pn.per_frame_ms;
    const double secs = seconds_since(t0);
    out.detail = fmt("PN %.2f ms/frame, SN-kNN %.2f ms/frame over %zu-image bank, ratio %.1fx, %.1f s", pn.per_frame_ms,
                     sn.per_frame_ms, ds.count(Split::train), ratio, secs);
    if (!(a.encoder == b.encoder)) out.fail("encoders differ");
    if (ds.count(Split::train) != 120) out.fail("support bank is not 120 images");
    if (pn.n_frames != 120 || sn.n_frames != 120) out.fail("frame count is not 120");
    if (ratio < 5.0) out.fail(fmt("ratio %.2f below 5", ratio));
    for (const SpeedReport* r : {&pn, &sn})
        if (std::abs(r->fps * r->per_frame_ms - 1000.0) > 1e-6 * 1000.0) out.fail("fps x per_frame_ms != 1000");
    if (secs >= 300) out.fail(fmt("took %.1f s", secs));
    return out;
}

Outcome criterion_determinism(const fs::path& root) {
    Outcome out;
    int compared = 0;
    for (const char* key : {"pn-easy", "sn-knn-easy"}) {
        const fs::path orig = root / key;
        const fs::path replay = root / (std::string(key) + "-replay");
        cmd_train(load_run_config(orig / kConfigFile), replay);
        cmd_eval(RunInputs{replay});
        for (const char* f : {kTrainingLogFile, kEvalJsonFile, kEvalTextFile, kCheckpointFile}) {
            ++compared;
            if (slurp(orig / f) != slurp(replay / f)) out.fail(fmt("%s/%s differs on replay", key, f));
        }
    }
    if (out.pass)
        out.detail = fmt("replayed pn-easy and sn-knn-easy from their stored configs, %d artifacts byte-identical",
                         compared);
    return out;
}

void report(int n, const Outcome& o, int& failures) {
    std::printf("%s criterion %d: %s\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    auto want = [&](int n) { return wanted.empty() || wanted.count(n) > 0; };

    int failures = 0;
    if (want(1)) report(1, criterion_math(), failures);
    if (want(2)) report(2, criterion_sampler(), failures);
    if (want(3)) report(3, criterion_knn(), failures);
    if (want(4)) report(4, criterion_gradients(), failures);

    if (want(5) || want(6) || want(7) || want(8)) {
        const fs::path root = test::scratch_dir("acceptance");
        const Pipelines p = run_all(root);
        if (want(5)) report(5, criterion_end_to_end(p), failures);
        if (want(6)) report(6, criterion_convergence(p), failures);
        if (want(7)) report(7, criterion_speed(root), failures);
        if (want(8)) report(8, criterion_determinism(root), failures);
    }
    return failures == 0 ? 0 : 1;
}
