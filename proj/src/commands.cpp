#include "fewshot/commands.hpp"

#include <fstream>

#include <json.hpp>

#include "fewshot/checkpoint.hpp"
#include "fewshot/error.hpp"
#include "fewshot/plot.hpp"
#include "fewshot/protonet.hpp"
#include "fewshot/rng.hpp"
#include "fewshot/siamese.hpp"

namespace fewshot {

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string origin_of(const RunConfig& cfg) {
    if (cfg.dataset_root.empty()) return "synthetic:" + std::string(to_string(cfg.synthetic));
    return "directory:" + cfg.dataset_root;
}

nlohmann::ordered_json run_manifest(const RunConfig& cfg, const Dataset& ds) {
    nlohmann::ordered_json j;
    j["origin"] = origin_of(cfg);
    j["seed"] = cfg.data_seed;
    j["classes"] = ds.classes();
    for (Split s : all_splits) {
        auto& rows = j["splits"][std::string(to_string(s))];
        rows = nlohmann::ordered_json::array();
        for (std::size_t i : ds.indices(s)) rows.push_back(ds.sample(i).source_id);
    }
    return j;
}

TrainOptions train_options(const RunConfig& cfg) {
    TrainOptions o;
    o.epochs = cfg.epochs;
    o.steps_per_epoch = cfg.steps_per_epoch;
    o.optimizer = cfg.optimizer;
    o.transform = cfg.transform;
    o.validation_seed = cfg.validation_seed;
    return o;
}

struct LoadedRun {
    RunConfig cfg;
    Checkpoint ck;
    Dataset ds;
};

LoadedRun load_run(const RunInputs& in) {
    const fs::path config_path = in.run_dir / kConfigFile;
    if (!fs::is_regular_file(config_path)) throw IoError("no " + std::string(kConfigFile) + " in " + in.run_dir.string());
    RunConfig cfg = load_run_config(config_path);
    if (!in.dataset.empty()) cfg.dataset_root = in.dataset.string();

    const fs::path ck_path = in.checkpoint.empty() ? in.run_dir / kCheckpointFile : in.checkpoint;
    Checkpoint ck = load_checkpoint(ck_path);
    if (in.expect_algorithm && ck.algorithm != to_string(*in.expect_algorithm))
        throw ConfigError("checkpoint holds a '" + ck.algorithm + "' model, expected " +
                          std::string(to_string(*in.expect_algorithm)));

    Dataset ds = resolve_dataset(cfg);
    if (ds.class_count() != static_cast<int>(ck.classes.size()))
        throw ConfigError("checkpoint has " + std::to_string(ck.classes.size()) + " classes, dataset has " +
                          std::to_string(ds.class_count()));
    if (ds.classes() != ck.classes) throw ConfigError("checkpoint and dataset class names differ");
    return {std::move(cfg), std::move(ck), std::move(ds)};
}

std::vector<Image> split_images(const Dataset& ds, Split s) {
    std::vector<Image> out;
    for (std::size_t i : ds.indices(s)) out.push_back(ds.sample(i).image);
    return out;
}

} // namespace

std::size_t cmd_prepare(const PrepareOptions& opts) {
    if (opts.out.empty()) throw ArgumentError("prepare needs an output directory");
    Dataset ds = opts.source.empty()
                     ? generate_synthetic_dataset(opts.classes, opts.split, opts.difficulty, opts.seed)
                     : load_dataset(opts.source, opts.split, opts.seed);
    ManifestInfo info;
    info.origin = opts.source.empty() ? "synthetic:" + std::string(to_string(opts.difficulty))
                                      : "directory:" + opts.source.string();
    info.seed = opts.seed;
    export_dataset(ds, opts.out, info, opts.overwrite);
    return ds.size();
}

TrainingResult cmd_train(const RunConfig& cfg, const fs::path& run_dir) {
    cfg.validate();
    fs::create_directories(run_dir);
    save_run_config(run_dir / kConfigFile, cfg);

    const Dataset ds = resolve_dataset(cfg);
    write_text(run_dir / kRunManifestFile, run_manifest(cfg, ds).dump(2) + "\n");

    Rng rng(cfg.sampler_seed);
    const TrainOptions opts = train_options(cfg);
    TrainingResult result;
    Checkpoint ck;
    if (cfg.algorithm == Algorithm::sn_knn) {
        SiameseModel model(cfg.encoder, cfg.sn_hidden, cfg.model_seed);
        result = train_siamese(model, ds, rng, opts, cfg.sn_anchors);
        ck = model.to_checkpoint(ds.classes());
    } else {
        Encoder encoder(cfg.encoder, cfg.model_seed);
        result = train_protonet(encoder, ds, rng, opts, cfg.pn_support, cfg.pn_query, cfg.pn_loss);
        const PrototypeSet protos = build_deployment_prototypes(encoder, ds, Split::train, cfg.transform);
        ck = protonet_checkpoint(encoder, protos, ds.classes());
    }
    ck.meta["best_epoch"] = result.best_epoch;
    ck.meta["best_val_acc"] = result.best_val_acc;
    save_checkpoint(run_dir / kCheckpointFile, ck);

    write_training_log(run_dir / kTrainingLogFile, result.log);
    write_text(run_dir / kCurvesCsvFile, curves_csv(result.log));
    if (cfg.plot)
        write_text(run_dir / kCurvesSvgFile,
                   render_curves_svg(result.log, std::string(to_string(cfg.algorithm)) + " training accuracy"));
    return result;
}

EvalOutcome cmd_eval(const RunInputs& in) {
    const LoadedRun run = load_run(in);
    const std::vector<Image> test = split_images(run.ds, Split::test);
    if (test.empty()) throw CapacityError("dataset has no test images");

    EvalOutcome out;
    out.classes = run.ds.classes();
    out.predictions.reserve(test.size());
    if (run.ck.algorithm == "sn-knn") {
        const SiameseModel model(run.ck);
        const SupportBank bank = build_support_bank(run.ds, Split::train, run.cfg.transform);
        for (const auto& r : knn_classify_many(model, test, bank, run.cfg.knn_k, run.cfg.transform))
            out.predictions.push_back(r.class_id);
    } else {
        const Encoder encoder = encoder_from_checkpoint(run.ck);
        const PrototypeSet protos = prototypes_from_checkpoint(run.ck);
        for (const auto& p : pn_classify_many(encoder, protos, test, run.cfg.transform))
            out.predictions.push_back(p.class_id);
    }

    std::vector<int> truths;
    for (std::size_t i : run.ds.indices(Split::test)) truths.push_back(run.ds.sample(i).class_id);
    out.confusion = confusion_matrix(out.predictions, truths, run.ds.class_count());
    out.metrics = macro_metrics(out.confusion);

    write_text(in.run_dir / kEvalJsonFile, evaluation_report_json(out.confusion, out.metrics, out.classes).dump(2) + "\n");
    write_text(in.run_dir / kEvalTextFile, evaluation_report_text(out.confusion, out.metrics, out.classes));
    return out;
}

SpeedReport cmd_bench(const RunInputs& in, int n_frames) {
    const LoadedRun run = load_run(in);
    if (n_frames <= 0) n_frames = run.cfg.bench_frames;

    std::vector<std::size_t> pool = run.ds.indices(Split::validation);
    if (pool.empty()) throw CapacityError("dataset has no validation images to stream");
    Rng rng(run.cfg.sampler_seed);
    std::vector<Image> frames;
    frames.reserve(n_frames);
    while (static_cast<int>(frames.size()) < n_frames) {
        rng.shuffle(pool);
        for (std::size_t i : pool) {
            if (static_cast<int>(frames.size()) == n_frames) break;
            frames.push_back(run.ds.sample(i).image);
        }
    }

    SpeedReport report;
    if (run.ck.algorithm == "sn-knn") {
        const SiameseModel model(run.ck);
        const SupportBank bank = build_support_bank(run.ds, Split::train, run.cfg.transform);
        const int k = run.cfg.knn_k;
        report = benchmark_inference(
            [&](const Image& img) { return knn_classify(model, img, bank, k, run.cfg.transform).class_id; }, frames);
    } else {
        const Encoder encoder = encoder_from_checkpoint(run.ck);
        const PrototypeSet protos = prototypes_from_checkpoint(run.ck);
        report = benchmark_inference(
            [&](const Image& img) { return pn_classify(encoder, protos, img, run.cfg.transform).class_id; }, frames);
    }

    nlohmann::ordered_json j;
    j["algorithm"] = run.ck.algorithm;
    j["n_frames"] = report.n_frames;
    j["total_ms"] = report.total_ms;
    j["per_frame_ms"] = report.per_frame_ms;
    j["fps"] = report.fps;
    write_text(in.run_dir / kSpeedReportFile, j.dump(2) + "\n");
    return report;
}

fs::path cmd_embed(const RunInputs& in, const fs::path& out) {
    const LoadedRun run = load_run(in);
    const fs::path target = out.empty() ? in.run_dir / kEmbeddingsFile : out;
    const Encoder encoder = encoder_from_checkpoint(run.ck);
    export_embeddings(encoder, run.ds, run.cfg.transform, target);
    return target;
}

} // namespace fewshot
