// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "tp/data.hpp"
#include "tp/graph.hpp"

namespace tp {

struct TrainConfig {
    int batch_size = 16;
    std::vector<double> lr_ladder{0.01, 0.005, 0.001, 0.0001};
    int patience = 3;             // epochs without improvement before stepping down
    double improve_rel = 1e-4;    // relative improvement threshold
    double momentum = 0.9;
    int max_epochs = 50;
    std::uint64_t seed = 1;
    bool use_augment = true;
    int resize_short = 26;
    int crop = 24;  // network input size

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    double best_val_loss = 0.0;
    int best_epoch = -1;
    bool stopped_by_schedule = false;  // ladder exhausted + final plateau
};

/// SGDM training with the plateau-driven learning-rate ladder. Steps the rate
/// down each time validation loss fails to improve for `patience` epochs,
/// stops when the ladder is exhausted and a final plateau occurs (or at
/// max_epochs), and restores the best-validation weights.
TrainResult train(NetworkGraph& graph, const Dataset& ds, const TrainConfig& cfg);

/// Mean classification loss over the given samples (evaluation preprocessing,
/// batch norm in inference mode).
double evaluate_loss(const NetworkGraph& graph, const Dataset& ds, std::span<const int> indices,
                     int resize_short, int crop, int batch_size = 64);

/// Top-1 classification accuracy over the given samples.
double evaluate_accuracy(const NetworkGraph& graph, const Dataset& ds,
                         std::span<const int> indices, int resize_short, int crop,
                         int batch_size = 64);

}  // namespace tp
