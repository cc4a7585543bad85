// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "tp/graph.hpp"

namespace tp {

struct FilterRef {
    std::string node;
    int channel = 0;
};

/// A set of structurally coupled filters that must be removed together:
/// channels feeding the same residual add share a group across branches,
/// a depthwise conv's channels are fused with its parent conv's channels,
/// and concat consumers are tracked as re-mapped input slices.
struct PruneGroup {
    std::string id;
    std::vector<FilterRef> members;    // conv + depthwise channels
    std::vector<FilterRef> bn_params;  // per-channel batch-norm params riding along
    std::vector<FilterRef> consumers;  // (conv/fc node, input channel) slices to drop
    int layer_index = 0;               // topological index of the first member
    int channel_index = 0;
    int origin_width = 0;              // out-channel count of the first member's layer
    int primary_filters = 0;           // members on regular conv layers
};

/// Partitions every prunable output channel of the graph into groups.
/// Throws on coupling patterns that cannot be pruned structurally (e.g.
/// conv channels tied to input-image channels through an add).
std::vector<PruneGroup> resolve_prune_groups(const NetworkGraph& graph);

/// Returns a rewritten graph with the given groups' filters, coupled
/// batch-norm parameters and downstream input slices excised. Errors if any
/// layer would lose its last channel or a group does not match the graph.
NetworkGraph remove_groups(const NetworkGraph& graph, const std::vector<PruneGroup>& groups);

/// Id-based convenience wrapper; unknown ids raise an error.
NetworkGraph remove_groups_by_id(const NetworkGraph& graph,
                                 const std::vector<PruneGroup>& all_groups,
                                 const std::vector<std::string>& ids);

/// First-order Taylor importance per group: sum over member parameters
/// (weights, bias and coupled batch-norm scale/shift) of (grad * value)^2.
/// Requires gradients to be populated by a backward pass.
std::vector<double> group_scores(const NetworkGraph& graph,
                                 const std::vector<PruneGroup>& groups);

std::int64_t group_param_count(const NetworkGraph& graph, const PruneGroup& group);

/// Zeroes every learnable parameter belonging to the group (weights, bias,
/// batch-norm scale and shift), making the group functionally removed.
void zero_group_params(NetworkGraph& graph, const PruneGroup& group);

}  // namespace tp
