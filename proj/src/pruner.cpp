// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace tp {

void PruneSchedule::validate() const {
    if (fraction <= 0.0 || fraction >= 1.0) throw ConfigError("prune: fraction must be in (0,1)");
    if (subset_fraction <= 0.0 || subset_fraction > 1.0)
        throw ConfigError("prune: subset fraction must be in (0,1]");
    if (target_sparsity <= 0.0 || target_sparsity >= 1.0)
        throw ConfigError("prune: target sparsity must be in (0,1)");
    if (max_epochs < 0) throw ConfigError("prune: max_epochs must be >= 0");
    if (lr <= 0.0) throw ConfigError("prune: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("prune: momentum must be in [0,1)");
    if (batch_size < 1) throw ConfigError("prune: batch_size must be >= 1");
    if (eval_interval < 0) throw ConfigError("prune: eval_interval must be >= 0");
}

double ImportanceTable::average(std::size_t i) const {
    if (minibatches < 1) throw Error("importance table: no minibatches accumulated");
    return sums[i] / static_cast<double>(minibatches);
}

SgdmState make_sgdm_state(const NetworkGraph& graph) {
    SgdmState st;
    for (const auto& p : graph.parameters()) st.velocity.push_back(Tensor::zeros(p->shape));
    return st;
}

std::int64_t removal_quota(std::int64_t live_filters, double fraction) {
    return static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(live_filters)));
}

std::vector<double> group_importance(const NetworkGraph& graph,
                                     const std::vector<PruneGroup>& groups,
                                     bool normalize_by_size) {
    auto scores = group_scores(graph, groups);
    if (normalize_by_size) {
        for (std::size_t i = 0; i < groups.size(); ++i) {
            scores[i] /= static_cast<double>(group_param_count(graph, groups[i]));
        }
    }
    return scores;
}

std::vector<int> draw_scoring_subset(const Dataset& ds, const PruneSchedule& sched, int epoch) {
    if (ds.train_indices.empty()) throw Error("prune: dataset has no train split");
    std::vector<int> pool = ds.train_indices;
    std::uint64_t seed = sched.resample_subset
                             ? derive_seed(sched.seed, "subset", static_cast<std::uint64_t>(epoch))
                             : derive_seed(sched.seed, "subset");
    Rng rng(seed);
    rng.shuffle(pool);
    std::size_t m = static_cast<std::size_t>(
        std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                      std::floor(sched.subset_fraction * pool.size()))));
    pool.resize(m);
    return pool;
}

PruneEpochResult prune_epoch(const NetworkGraph& graph_in, const Dataset& ds,
                             std::span<const int> subset, const PruneSchedule& sched,
                             SgdmState& opt_state, int epoch_index) {
    sched.validate();
    if (subset.empty()) throw Error("prune_epoch: empty scoring subset");

    NetworkGraph graph = graph_in.clone();
    auto params = graph.parameters();
    if (opt_state.velocity.size() != params.size())
        throw Error("prune_epoch: optimizer state does not match graph");
    auto groups = resolve_prune_groups(graph);

    ImportanceTable table;
    table.group_ids.reserve(groups.size());
    for (const auto& g : groups) table.group_ids.push_back(g.id);
    table.sums.assign(groups.size(), 0.0);

    Rng erng(derive_seed(sched.seed, "prune_epoch", static_cast<std::uint64_t>(epoch_index)));
    std::vector<int> order(subset.begin(), subset.end());
    erng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(sched.batch_size)) {
        std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(sched.batch_size));
        std::vector<TensorPtr> images;
        std::vector<int> labels;
        for (std::size_t k = at; k < end; ++k) {
            const auto& s = ds.samples[static_cast<std::size_t>(order[k])];
            images.push_back(sched.use_augment
                                 ? augment(s.image, sched.resize_short, sched.crop, erng)
                                 : eval_preprocess(s.image, sched.resize_short, sched.crop));
            labels.push_back(s.label);
        }
        auto batch = batch_images(images);
        Tape tape;
        auto out = forward(graph, batch, /*training=*/true, &tape);
        auto loss = ops::softmax_cross_entropy(&tape, out.logits, labels);
        if (!std::isfinite(loss->data[0])) {
            throw NumericalError("prune_epoch: non-finite loss at batch offset " +
                                 std::to_string(at));
        }
        loss_sum += loss->data[0] * static_cast<double>(labels.size());
        for (const auto& p : params) p->zero_grad();
        tape.backward(loss);
        // importance from the gradients and the weights that produced them,
        // then the interleaved descent step
        auto scores = group_importance(graph, groups, sched.normalize_by_size);
        for (std::size_t i = 0; i < scores.size(); ++i) table.sums[i] += scores[i];
        ++table.minibatches;
        ops::sgdm_step(params, opt_state.velocity, sched.lr, sched.momentum);
    }

    // selection: k lowest epoch averages, deterministic tie-break, skipping
    // groups whose removal would empty a layer
    std::int64_t quota = removal_quota(graph.live_filters(), sched.fraction);
    std::vector<std::size_t> order_idx(groups.size());
    std::iota(order_idx.begin(), order_idx.end(), 0);
    std::sort(order_idx.begin(), order_idx.end(), [&](std::size_t a, std::size_t b) {
        double sa = table.sums[a], sb = table.sums[b];
        if (sa != sb) return sa < sb;
        if (groups[a].layer_index != groups[b].layer_index)
            return groups[a].layer_index < groups[b].layer_index;
        return groups[a].channel_index < groups[b].channel_index;
    });

    std::unordered_map<std::string, int> remaining;
    for (const auto& nd : graph.nodes) {
        if (nd.kind == LayerKind::Conv) remaining[nd.id] = nd.weight->dim(0);
        if (nd.kind == LayerKind::DepthwiseConv) remaining[nd.id] = nd.weight->dim(0);
    }

    PruneEpochResult result;
    std::vector<PruneGroup> chosen;
    for (std::size_t oi = 0; oi < order_idx.size() &&
                             static_cast<std::int64_t>(chosen.size()) < quota;
         ++oi) {
        const auto& g = groups[order_idx[oi]];
        bool empties = false;
        for (const auto& m : g.members) {
            if (remaining.at(m.node) <= 1) {
                empties = true;
                break;
            }
        }
        if (empties) {
            ++result.skips;
            continue;
        }
        for (const auto& m : g.members) --remaining.at(m.node);
        chosen.push_back(g);
        result.removed.push_back({g.id, g.members.front().node, g.origin_width,
                                  g.primary_filters, table.average(order_idx[oi])});
    }

    result.graph = chosen.empty() ? graph : remove_groups(graph, chosen);
    result.table = std::move(table);
    result.mean_loss = loss_sum / static_cast<double>(order.size());
    return result;
}

PruneTrajectory run_pruning(NetworkGraph& graph, const Dataset& ds, const PruneSchedule& sched,
                            const EvalHook& eval_hook, const CheckpointSink& sink,
                            int start_iteration, std::int64_t initial_filters_override) {
    sched.validate();
    PruneTrajectory traj;
    for (const auto& nd : graph.nodes) {
        if (nd.kind == LayerKind::Conv || nd.kind == LayerKind::DepthwiseConv)
            traj.layer_ids.push_back(nd.id);
    }
    traj.initial_filters =
        initial_filters_override > 0 ? initial_filters_override : graph.live_filters();

    int iteration = start_iteration;
    while (true) {
        // integer-side comparison so e.g. 10 removed of 100 meets target 0.10
        double removed = static_cast<double>(traj.initial_filters - graph.live_filters());
        if (removed >= sched.target_sparsity * static_cast<double>(traj.initial_filters) - 1e-9)
            break;
        if (sched.max_epochs > 0 && iteration - start_iteration >= sched.max_epochs) break;

        auto subset = draw_scoring_subset(ds, sched, iteration);
        auto opt_state = make_sgdm_state(graph);  // per-epoch momentum state
        auto res = prune_epoch(graph, ds, subset, sched, opt_state, iteration);
        graph = std::move(res.graph);
        ++iteration;

        IterationRecord rec;
        rec.iteration = iteration;
        rec.pruned_fraction = 1.0 - static_cast<double>(graph.live_filters()) /
                                        static_cast<double>(traj.initial_filters);
        rec.learnables = graph.count_learnables();
        rec.embedding_size = graph.embedding_size();
        rec.removed = std::move(res.removed);
        rec.skips = res.skips;
        rec.mean_loss = res.mean_loss;
        std::unordered_map<std::string, int> width;
        for (const auto& nd : graph.nodes)
            if (nd.kind == LayerKind::Conv || nd.kind == LayerKind::DepthwiseConv)
                width[nd.id] = nd.weight->dim(0);
        for (const auto& id : traj.layer_ids) {
            auto it = width.find(id);
            rec.filters_per_layer.push_back(it == width.end() ? 0 : it->second);
        }
        bool eval_now = eval_hook && sched.eval_interval > 0 &&
                        (iteration % sched.eval_interval == 0 ||
                         rec.pruned_fraction >= sched.target_sparsity);
        if (eval_now) {
            if (auto eer = eval_hook(graph, iteration)) {
                rec.eer_1to1 = eer->first;
                rec.eer_5to5 = eer->second;
            }
        }
        if (sink) sink(iteration, graph);
        bool no_progress = rec.removed.empty();
        traj.records.push_back(std::move(rec));
        if (no_progress) break;  // every candidate skipped; cannot advance
    }
    return traj;
}

TrainResult retrain(NetworkGraph& graph, const Dataset& ds, const TrainConfig& cfg) {
    return train(graph, ds, cfg);
}

}  // namespace tp
