// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tp/ops.hpp"
#include "tp/tensor.hpp"

namespace tp {

enum class LayerKind : std::uint8_t {
    Input = 0,
    Conv = 1,
    DepthwiseConv = 2,
    BatchNorm = 3,
    ReLU = 4,
    ReLU6 = 5,
    Add = 6,
    Concat = 7,
    GlobalAvgPool = 8,
    FullyConnected = 9,
};

const char* layer_kind_name(LayerKind k);

struct LayerNode {
    std::string id;
    LayerKind kind = LayerKind::Input;
    std::vector<std::string> inputs;

    // conv / depthwise attributes
    int kernel_h = 0, kernel_w = 0, stride = 1, pad = 0;

    // A classifier appended to a family whose canonical form has no FC stage;
    // excluded from conv_depth().
    bool aux_head = false;

    TensorPtr weight, bias;                         // conv / depthwise / fc
    TensorPtr gamma, beta, run_mean, run_var;       // batch norm
    double bn_momentum = 0.1, bn_eps = 1e-5;

    bool has_weights() const {
        return kind == LayerKind::Conv || kind == LayerKind::DepthwiseConv ||
               kind == LayerKind::FullyConnected || kind == LayerKind::BatchNorm;
    }
};

/// Layer DAG in topological order plus the embedding (global-average-pool)
/// and classifier-head designations that make pruning and descriptor
/// extraction well defined.
struct NetworkGraph {
    std::string family;
    int input_h = 0, input_w = 0, input_c = 0;
    std::string embedding_node;
    std::string head_node;
    std::vector<LayerNode> nodes;

    int index_of(const std::string& id) const;  // -1 when absent
    const LayerNode& node(const std::string& id) const;
    LayerNode& node(const std::string& id);

    /// Structural checks: unique ids, inputs precede consumers, per-kind
    /// weight shapes consistent with propagated channel counts.
    void validate() const;

    /// Output channel count per node, in node order.
    std::vector<int> channels() const;

    /// Trainable tensors (conv/fc weights and biases, BN gamma/beta), in a
    /// deterministic order. Running statistics are excluded.
    std::vector<TensorPtr> parameters() const;

    std::int64_t count_learnables() const;
    int embedding_size() const;

    /// Longest chain of conv / depthwise / fully-connected layers, the depth
    /// figure quoted for the canonical architectures. Auxiliary heads are not
    /// counted.
    int conv_depth() const;

    /// Capacity metric used by pruning toolboxes: sum of ceil(0.8 * filters)
    /// over regular conv layers (each layer retains at least 20% of its
    /// filters; depthwise channels follow their parent and are not counted).
    std::int64_t max_prunable_filters() const;

    /// Plain count of filters in regular conv layers; the base for per-epoch
    /// removal quotas.
    std::int64_t live_filters() const;

    NetworkGraph clone() const;

    /// Copies all tensor values (weights and running stats) from a graph with
    /// identical structure.
    void copy_state_from(const NetworkGraph& other);
};

struct ForwardResult {
    std::vector<TensorPtr> activations;  // aligned with graph.nodes
    TensorPtr logits;
    TensorPtr embedding;
};

/// Evaluates the graph on a [N,C,H,W] batch. Training mode uses batch-norm
/// batch statistics and updates running buffers; a tape may be supplied to
/// record gradients. The graph is mutated only through BN running stats in
/// training mode.
ForwardResult forward(const NetworkGraph& graph, const TensorPtr& batch, bool training,
                      Tape* tape);

// ---- model file format -----------------------------------------------------
//
// Binary, little-endian, versioned:
//   magic "TPNT", u32 version, u64 config_hash, graph header, node table,
//   tensor payloads (u32 rank, u32 extents..., float32 row-major values),
//   u64 FNV-1a checksum of all preceding bytes.

std::vector<std::uint8_t> serialize(const NetworkGraph& graph, std::uint64_t config_hash = 0);
NetworkGraph deserialize(const std::vector<std::uint8_t>& bytes,
                         std::uint64_t* config_hash = nullptr);

void save_model(const std::filesystem::path& path, const NetworkGraph& graph,
                std::uint64_t config_hash = 0);
NetworkGraph load_model(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace tp
