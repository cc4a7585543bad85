// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tp/graph.hpp"

namespace tp {

/// Scale parameters for the three architecture families. Accepted as a
/// plain-text key-value file; see ScaleConfig::from_file for the format.
struct ScaleConfig {
    std::string family;  // fire-net | inverted-residual-net | bottleneck-net
    int input_h = 24, input_w = 24, input_c = 1;
    int class_count = 2;
    int stem = 8;
    int first_stride = 1;  // stride of the first conv (1 for small inputs)

    // fire-net
    std::vector<int> fire_squeeze;
    std::vector<int> fire_expand;      // each expand half; e1x1 == e3x3
    std::vector<int> fire_downsample;  // indices of fire modules with stride-2 squeeze
    int fire_embed = 16;               // final 1x1 conv (the embedding conv)

    // inverted-residual-net: groups of identical blocks
    struct InvResGroup {
        int expand_ratio = 1;
        int channels = 8;
        int blocks = 1;
        int stride = 1;
    };
    std::vector<InvResGroup> invres_groups;
    int invres_embed = 32;  // final 1x1 conv

    // bottleneck-net: stages of residual blocks; widths are (r, r, 4r)
    struct BottleneckStage {
        int reduce = 4;
        int blocks = 1;
        int stride = 1;
    };
    std::vector<BottleneckStage> stages;

    void validate() const;
    static ScaleConfig from_file(const std::filesystem::path& path);
    static ScaleConfig from_kv(const std::map<std::string, std::string>& kv);
    std::map<std::string, std::string> to_kv() const;
};

/// Builds one of the three families as a layer DAG with batch norm after
/// every conv, a global-average-pool embedding node and a fully-connected
/// classifier head. Weights are initialised from `rng` (float-exact values,
/// so freshly built graphs serialize losslessly).
NetworkGraph build_architecture(const ScaleConfig& cfg, Rng& rng);

/// Canonical full-size configurations of the three families.
ScaleConfig paper_scale_config(const std::string& family);

}  // namespace tp
