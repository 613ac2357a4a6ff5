#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fewshot/commands.hpp"
#include "fewshot/error.hpp"

using namespace fewshot;

namespace {

void add_run_inputs(CLI::App* cmd, RunInputs& in, std::string& algorithm) {
    cmd->add_option("--run", in.run_dir, "Run directory written by `train`")->required();
    cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint file (default: <run>/checkpoint.bin)");
    cmd->add_option("--dataset", in.dataset, "Dataset directory overriding the stored config");
    cmd->add_option("--algorithm", algorithm, "Fail unless the checkpoint holds this algorithm")
        ->check(CLI::IsMember({"sn-knn", "pn"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot image classification: siamese kNN and prototypical networks"};
    app.require_subcommand(1);

    PrepareOptions prep;
    std::string prep_difficulty = "easy";
    auto* prepare = app.add_subcommand("prepare", "Write a dataset directory with a manifest");
    prepare->add_option("--out", prep.out, "Output directory")->required();
    prepare->add_option("--source", prep.source, "Directory of class folders (default: synthetic)");
    prepare->add_option("--difficulty", prep_difficulty, "Synthetic difficulty")
        ->check(CLI::IsMember({"easy", "hard"}));
    prepare->add_option("--classes", prep.classes, "Synthetic class count");
    prepare->add_option("--train", prep.split.train, "Training images per class");
    prepare->add_option("--validation", prep.split.validation, "Validation images per class");
    prepare->add_option("--test", prep.split.test, "Test images per class");
    prepare->add_option("--seed", prep.seed, "Data seed");
    prepare->add_flag("--overwrite", prep.overwrite, "Replace an existing prepared dataset");

    fs::path train_out, train_config;
    std::vector<std::string> overrides;
    std::string train_algorithm, train_dataset;
    int train_epochs = -1;
    bool no_plot = false;
    auto* train = app.add_subcommand("train", "Train a model into a run directory");
    train->add_option("--out", train_out, "Run directory")->required();
    train->add_option("--config", train_config, "Config file (key = value lines)");
    train->add_option("--set", overrides, "Override a config key, e.g. --set knn.k=3");
    train->add_option("--algorithm", train_algorithm, "sn-knn or pn")->check(CLI::IsMember({"sn-knn", "pn"}));
    train->add_option("--epochs", train_epochs, "Training epochs");
    train->add_option("--dataset", train_dataset, "Dataset directory");
    train->add_flag("--no-plot", no_plot, "Skip the SVG curve plot");

    RunInputs eval_in, bench_in, embed_in;
    std::string eval_alg, bench_alg, embed_alg;
    int frames = 0;
    fs::path embed_out;
    auto* eval = app.add_subcommand("eval", "Evaluate on the test split");
    add_run_inputs(eval, eval_in, eval_alg);
    auto* bench = app.add_subcommand("bench", "Time per-frame inference");
    add_run_inputs(bench, bench_in, bench_alg);
    bench->add_option("--frames", frames, "Number of frames (default: bench.frames)");
    auto* embed = app.add_subcommand("embed", "Export embeddings as CSV");
    add_run_inputs(embed, embed_in, embed_alg);
    embed->add_option("--out", embed_out, "Output CSV (default: <run>/embeddings.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*prepare) {
            prep.difficulty = parse_difficulty(prep_difficulty);
            const std::size_t n = cmd_prepare(prep);
            std::printf("wrote %zu images to %s\n", n, prep.out.string().c_str());
        } else if (*train) {
            RunConfig cfg = train_config.empty() ? RunConfig{} : load_run_config(train_config);
            if (!train_algorithm.empty()) cfg.algorithm = parse_algorithm(train_algorithm);
            if (train_epochs >= 0) cfg.epochs = train_epochs;
            if (!train_dataset.empty()) cfg.dataset_root = train_dataset;
            if (no_plot) cfg.plot = false;
            for (const auto& o : overrides) cfg.apply_override(o);
            const TrainingResult r = cmd_train(cfg, train_out);
            std::printf("trained %zu epochs, best epoch %d (val acc %.4f)\n", r.log.size(), r.best_epoch,
                        r.best_val_acc);
        } else if (*eval) {
            if (!eval_alg.empty()) eval_in.expect_algorithm = parse_algorithm(eval_alg);
            const EvalOutcome out = cmd_eval(eval_in);
            std::cout << evaluation_report_text(out.confusion, out.metrics, out.classes);
        } else if (*bench) {
            if (!bench_alg.empty()) bench_in.expect_algorithm = parse_algorithm(bench_alg);
            const SpeedReport r = cmd_bench(bench_in, frames);
            std::printf("%d frames: total %.3f ms, %.3f ms/frame, %.2f fps\n", r.n_frames, r.total_ms,
                        r.per_frame_ms, r.fps);
        } else if (*embed) {
            if (!embed_alg.empty()) embed_in.expect_algorithm = parse_algorithm(embed_alg);
            const fs::path p = cmd_embed(embed_in, embed_out);
            std::printf("wrote %s\n", p.string().c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
