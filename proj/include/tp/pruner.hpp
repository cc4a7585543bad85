// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tp/data.hpp"
#include "tp/graph.hpp"
#include "tp/groups.hpp"
#include "tp/trainer.hpp"

namespace tp {

struct PruneSchedule {
    double fraction = 0.01;         // of live filters, removed per epoch (as groups)
    double subset_fraction = 0.25;  // of the training split used for scoring
    double target_sparsity = 0.5;   // stop once this fraction of filters is gone
    int max_epochs = 0;             // optional cap; 0 = until target
    double lr = 0.01;               // interleaved SGDM updates
    double momentum = 0.9;
    int batch_size = 16;
    bool resample_subset = false;   // redraw the scoring subset each epoch
    bool normalize_by_size = false; // divide group scores by parameter count
    std::uint64_t seed = 1;
    int eval_interval = 0;          // iterations between eval-hook calls; 0 = never
    bool use_augment = true;
    int resize_short = 26;
    int crop = 24;

    void validate() const;
};

/// Per-group running sums of minibatch Taylor scores for one epoch.
struct ImportanceTable {
    std::vector<std::string> group_ids;
    std::vector<double> sums;
    int minibatches = 0;

    double average(std::size_t i) const;
};

struct RemovedGroupInfo {
    std::string group_id;
    std::string first_node;
    int origin_width = 0;   // width of the first member's layer at removal time
    int primary_filters = 0;
    double score = 0.0;
};

struct IterationRecord {
    int iteration = 0;
    double pruned_fraction = 0.0;
    std::int64_t learnables = 0;
    int embedding_size = 0;
    std::optional<double> eer_1to1, eer_5to5;
    std::vector<RemovedGroupInfo> removed;
    std::vector<int> filters_per_layer;  // aligned with PruneTrajectory::layer_ids
    int skips = 0;
    double mean_loss = 0.0;
};

struct PruneTrajectory {
    std::vector<std::string> layer_ids;  // weighted layers of the original graph
    std::vector<IterationRecord> records;
    std::int64_t initial_filters = 0;
};

struct SgdmState {
    std::vector<TensorPtr> velocity;  // aligned with graph.parameters()
};

SgdmState make_sgdm_state(const NetworkGraph& graph);

/// Groups removed per epoch: ceil(fraction * live filter count).
std::int64_t removal_quota(std::int64_t live_filters, double fraction);

/// One minibatch worth of Eq-style group scores from the gradients currently
/// stored on the graph (backward must have run).
std::vector<double> group_importance(const NetworkGraph& graph,
                                     const std::vector<PruneGroup>& groups,
                                     bool normalize_by_size);

struct PruneEpochResult {
    NetworkGraph graph;
    ImportanceTable table;
    std::vector<RemovedGroupInfo> removed;
    int skips = 0;
    double mean_loss = 0.0;
};

/// One pruning epoch over the scoring subset: per minibatch forward, backward,
/// SGDM update and importance accumulation; at the end removes the
/// ceil(fraction * live-filters) lowest-average groups (ties broken by layer
/// then channel index; groups whose removal would empty a layer are skipped
/// and recorded).
PruneEpochResult prune_epoch(const NetworkGraph& graph, const Dataset& ds,
                             std::span<const int> subset, const PruneSchedule& sched,
                             SgdmState& opt_state, int epoch_index);

/// Returns {eer_1to1, eer_5to5} when evaluation ran at this iteration.
using EvalHook =
    std::function<std::optional<std::pair<double, double>>(const NetworkGraph&, int iteration)>;
using CheckpointSink = std::function<void(int iteration, const NetworkGraph&)>;

/// Iterates prune_epoch until the target sparsity (or epoch cap), invoking
/// the eval hook at the configured interval and handing every iteration's
/// graph to the checkpoint sink. `start_iteration` resumes an existing run.
PruneTrajectory run_pruning(NetworkGraph& graph, const Dataset& ds, const PruneSchedule& sched,
                            const EvalHook& eval_hook, const CheckpointSink& sink,
                            int start_iteration = 0,
                            std::int64_t initial_filters_override = -1);

/// Post-pruning fine-tuning; thin wrapper over trainer::train.
TrainResult retrain(NetworkGraph& graph, const Dataset& ds, const TrainConfig& cfg);

/// The scoring subset for a run: a seeded sample of the train split.
std::vector<int> draw_scoring_subset(const Dataset& ds, const PruneSchedule& sched, int epoch);

}  // namespace tp
