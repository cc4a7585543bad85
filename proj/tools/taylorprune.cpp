// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line driver: gen-data, train, prune, retrain, eval, explain, report.
// Exit codes: 0 success, 2 config error, 3 missing input, 4 numerical failure.

#include <omp.h>

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tp/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"taylorprune: structured filter pruning with verification and heatmaps"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_option("--seed", seed, "override the global seed");
    app.add_option("--out", out_dir, "override the output directory");
    app.add_option("--threads", threads, "worker threads (1 = fully serial)");

    std::optional<std::string> dataset_path;
    std::vector<std::string> checkpoints;
    std::string retrain_variant = "high";

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic identity dataset");
    auto* train = app.add_subcommand("train", "train the configured architecture");
    train->add_option("--dataset", dataset_path, "dataset file (default: <out>/dataset.bin)");
    auto* prune = app.add_subcommand("prune", "iterative importance pruning");
    prune->add_option("--checkpoint", checkpoints,
                      "starting checkpoint (default: <out>/model_initial.tpnt)");
    auto* retrain = app.add_subcommand("retrain", "fine-tune a pruned checkpoint");
    retrain->add_option("--checkpoint", checkpoints, "checkpoint to retrain")->required();
    retrain->add_option("--variant", retrain_variant, "lr ladder: high (0.01) or low (0.001)");
    auto* eval = app.add_subcommand("eval", "verification scores and EER for a checkpoint");
    eval->add_option("--checkpoint", checkpoints, "checkpoint to evaluate")->required();
    auto* explain = app.add_subcommand("explain", "heatmaps and PSNR histogram for two checkpoints");
    explain->add_option("--checkpoint", checkpoints, "two checkpoints: reference, comparison")
        ->expected(2);
    auto* report = app.add_subcommand("report", "consolidated CSVs and charts for a run");
    (void)gen;
    (void)report;

    CLI11_PARSE(app, argc, argv);

    try {
        tp::Overrides ov;
        ov.seed = seed;
        ov.out_dir = out_dir;
        ov.threads = threads;
        auto cfg = tp::load_experiment_config(config_path, ov);
        omp_set_num_threads(cfg.threads > 0 ? cfg.threads : omp_get_num_procs());

        if (app.got_subcommand("gen-data")) {
            tp::cmd_gen_data(cfg);
        } else if (app.got_subcommand("train")) {
            tp::cmd_train(cfg, dataset_path);
        } else if (app.got_subcommand("prune")) {
            tp::cmd_prune(cfg, checkpoints.empty()
                                   ? std::nullopt
                                   : std::make_optional(checkpoints.front()));
        } else if (app.got_subcommand("retrain")) {
            tp::cmd_retrain(cfg, checkpoints.front(), retrain_variant);
        } else if (app.got_subcommand("eval")) {
            tp::cmd_eval(cfg, checkpoints.front());
        } else if (app.got_subcommand("explain")) {
            tp::cmd_explain(cfg, checkpoints.at(0), checkpoints.at(1));
        } else if (app.got_subcommand("report")) {
            tp::cmd_report(cfg);
        }
    } catch (const tp::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const tp::IoError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return 3;
    } catch (const tp::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
