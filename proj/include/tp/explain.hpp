// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "tp/data.hpp"
#include "tp/graph.hpp"

namespace tp {

/// Grid-resolution relevance map, min-max normalized to [0,1]
/// (constant maps normalize to all zeros).
struct Heatmap {
    int rows = 0, cols = 0;
    std::vector<double> values;
    bool used_fallback = false;  // surrogate fit was singular; per-cell deltas used
    std::string source_image, source_network;

    double at(int r, int c) const {
        return values[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
    }
};

struct LimeConfig {
    int grid_rows = 8, grid_cols = 8;
    int samples = 256;   // random cell masks; must be >= cell count
    double fill = 0.5;   // occlusion value (dataset mean)
    std::uint64_t seed = 1;

    void validate() const;
};

/// Occlusion-based relevance: sample binary cell masks, occlude the off
/// cells, measure cosine similarity of the embedding to the unmasked one,
/// fit a least-squares linear surrogate on the mask bits. Cell relevance is
/// the surrogate coefficient, min-max normalized.
Heatmap lime_heatmap(const NetworkGraph& graph, const TensorPtr& image, const LimeConfig& cfg);

/// Least-squares fit of responses on mask bits (plus intercept); returns
/// cells+1 coefficients ([0] is the intercept). Exposed for property tests.
/// Falls back (sets *fallback) to single-occlusion deltas when singular.
std::vector<double> fit_mask_surrogate(const std::vector<std::vector<char>>& masks,
                                       std::span<const double> responses, bool* fallback);

Heatmap average_heatmap(std::span<const Heatmap> maps);

/// 10*log10(1/MSE) between [0,1]-normalized maps, capped at 100 dB.
double heatmap_psnr(const Heatmap& a, const Heatmap& b);

struct PsnrHistogram {
    std::vector<double> values;       // per-image PSNR
    std::vector<std::int64_t> counts; // histogram over [lo, hi]
    double lo = 0.0, hi = 100.0;
    int bins = 25;
};

/// Per-image PSNR between the heatmaps of two networks over a dataset subset;
/// images go through evaluation preprocessing (resize short side to
/// `resize_short`, centre crop to the graphs' input size) and per-image seeds
/// derive from the config seed and the dataset index.
PsnrHistogram psnr_histogram(const NetworkGraph& a, const NetworkGraph& b, const Dataset& ds,
                             std::span<const int> indices, const LimeConfig& cfg,
                             int resize_short, int bins = 25);

void save_heatmap_pgm(const std::filesystem::path& path, const Heatmap& map);

}  // namespace tp
