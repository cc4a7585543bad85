// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tp/builders.hpp"
#include "tp/config.hpp"
#include "tp/data.hpp"
#include "tp/explain.hpp"
#include "tp/pruner.hpp"
#include "tp/trainer.hpp"
#include "tp/verify.hpp"

namespace tp {

/// Fully resolved experiment configuration: one file, sections per module,
/// flags override keys, all randomness fanned out from the global seed.
struct ExperimentConfig {
    KvSections sections;  // effective (after overrides)
    std::uint64_t hash = 0;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;
    int threads = 1;

    SyntheticIdentityConfig data;
    ScaleConfig arch;
    TrainConfig train;
    std::vector<double> retrain_ladder_high{0.01, 0.005, 0.001, 0.0001};
    std::vector<double> retrain_ladder_low{0.001, 0.0001};
    int retrain_max_epochs = 20;
    PruneSchedule prune;
    int verify_window = 5;
    LimeConfig lime;
    int explain_images = 16;
    int explain_bins = 25;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const Overrides& ov = {});

/// Paths of the artifacts inside a run directory.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path dataset() const { return root / "dataset.bin"; }
    std::filesystem::path initial_model() const { return root / "model_initial.tpnt"; }
    std::filesystem::path train_history() const { return root / "train_history.csv"; }
    std::filesystem::path prune_dir() const { return root / "prune"; }
    std::filesystem::path trajectory() const { return prune_dir() / "trajectory.csv"; }
    std::filesystem::path filters_per_layer() const {
        return prune_dir() / "filters_per_layer.csv";
    }
    std::filesystem::path removed_groups() const { return prune_dir() / "removed_groups.csv"; }
    std::filesystem::path checkpoint(int iteration) const;
    std::filesystem::path retrain_dir() const { return root / "retrain"; }
    std::filesystem::path eval_dir() const { return root / "eval"; }
    std::filesystem::path explain_dir() const { return root / "explain"; }
    std::filesystem::path report_dir() const { return root / "report"; }
};

void cmd_gen_data(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg, const std::optional<std::string>& dataset_path);
void cmd_prune(const ExperimentConfig& cfg, const std::optional<std::string>& checkpoint);
void cmd_retrain(const ExperimentConfig& cfg, const std::string& checkpoint,
                 const std::string& variant);  // "high" (lr 0.01) or "low" (lr 0.001)
void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint);
void cmd_explain(const ExperimentConfig& cfg, const std::string& checkpoint_a,
                 const std::string& checkpoint_b);
void cmd_report(const ExperimentConfig& cfg);

/// EER pair {1-1, 5-5} for a graph on the dataset under the config's protocol.
std::pair<EerResult, EerResult> evaluate_eers(const ExperimentConfig& cfg,
                                              const NetworkGraph& graph, const Dataset& ds);

}  // namespace tp
