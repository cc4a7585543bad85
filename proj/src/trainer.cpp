// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tp {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (lr_ladder.empty()) throw ConfigError("train: lr ladder is empty");
    for (std::size_t i = 0; i + 1 < lr_ladder.size(); ++i) {
        if (lr_ladder[i + 1] >= lr_ladder[i])
            throw ConfigError("train: lr ladder must be strictly decreasing");
    }
    for (double lr : lr_ladder)
        if (lr <= 0.0) throw ConfigError("train: learning rates must be positive");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
    if (max_epochs < 0) throw ConfigError("train: max_epochs must be >= 0");
    if (crop < 1 || resize_short < crop) throw ConfigError("train: crop larger than resized side");
}

namespace {

std::vector<int> labels_of(const Dataset& ds, std::span<const int> indices) {
    std::vector<int> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(ds.samples[static_cast<std::size_t>(i)].label);
    return out;
}

}  // namespace

double evaluate_loss(const NetworkGraph& graph, const Dataset& ds, std::span<const int> indices,
                     int resize_short, int crop, int batch_size) {
    if (indices.empty()) throw Error("evaluate_loss: no samples");
    double total = 0.0;
    for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(indices.size(), at + static_cast<std::size_t>(batch_size));
        std::vector<TensorPtr> images;
        std::vector<int> labels;
        for (std::size_t k = at; k < end; ++k) {
            const auto& s = ds.samples[static_cast<std::size_t>(indices[k])];
            images.push_back(eval_preprocess(s.image, resize_short, crop));
            labels.push_back(s.label);
        }
        auto batch = batch_images(images);
        auto out = forward(graph, batch, /*training=*/false, nullptr);
        auto loss = ops::softmax_cross_entropy(nullptr, out.logits, labels);
        total += loss->data[0] * static_cast<double>(labels.size());
    }
    return total / static_cast<double>(indices.size());
}

double evaluate_accuracy(const NetworkGraph& graph, const Dataset& ds,
                         std::span<const int> indices, int resize_short, int crop,
                         int batch_size) {
    if (indices.empty()) throw Error("evaluate_accuracy: no samples");
    std::int64_t hits = 0;
    for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(batch_size)) {
        std::size_t end = std::min(indices.size(), at + static_cast<std::size_t>(batch_size));
        std::vector<TensorPtr> images;
        std::vector<int> labels;
        for (std::size_t k = at; k < end; ++k) {
            const auto& s = ds.samples[static_cast<std::size_t>(indices[k])];
            images.push_back(eval_preprocess(s.image, resize_short, crop));
            labels.push_back(s.label);
        }
        auto batch = batch_images(images);
        auto out = forward(graph, batch, /*training=*/false, nullptr);
        int n = out.logits->dim(0), k = out.logits->dim(1);
        for (int i = 0; i < n; ++i) {
            const double* row = out.logits->data.data() + static_cast<std::int64_t>(i) * k;
            int best = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[best]) best = j;
            if (best == labels[static_cast<std::size_t>(i)]) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

TrainResult train(NetworkGraph& graph, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.train_indices.empty() || ds.val_indices.empty())
        throw Error("train: dataset has no train/val split");
    {
        const auto& head = graph.node(graph.head_node);
        if (head.weight->dim(0) != ds.class_count) {
            throw ShapeError("train: classifier head has " + std::to_string(head.weight->dim(0)) +
                             " outputs for " + std::to_string(ds.class_count) + " classes");
        }
    }

    TrainResult result;
    auto params = graph.parameters();
    std::vector<TensorPtr> velocity;
    for (const auto& p : params) velocity.push_back(Tensor::zeros(p->shape));

    NetworkGraph best = graph.clone();
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
    std::size_t ladder_idx = 0;

    std::vector<int> order = ds.train_indices;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        double lr = cfg.lr_ladder[ladder_idx];
        Rng erng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        erng.shuffle(order);

        double train_loss = 0.0;
        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            std::vector<TensorPtr> images;
            std::vector<int> labels;
            for (std::size_t k = at; k < end; ++k) {
                const auto& s = ds.samples[static_cast<std::size_t>(order[k])];
                images.push_back(cfg.use_augment
                                     ? augment(s.image, cfg.resize_short, cfg.crop, erng)
                                     : eval_preprocess(s.image, cfg.resize_short, cfg.crop));
                labels.push_back(s.label);
            }
            auto batch = batch_images(images);
            Tape tape;
            auto out = forward(graph, batch, /*training=*/true, &tape);
            auto loss = ops::softmax_cross_entropy(&tape, out.logits, labels);
            if (!std::isfinite(loss->data[0])) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch offset " + std::to_string(at));
            }
            train_loss += loss->data[0] * static_cast<double>(labels.size());
            for (const auto& p : params) p->zero_grad();
            tape.backward(loss);
            ops::sgdm_step(params, velocity, lr, cfg.momentum);
        }
        train_loss /= static_cast<double>(order.size());

        double val_loss = evaluate_loss(graph, ds, ds.val_indices, cfg.resize_short, cfg.crop);
        if (!std::isfinite(val_loss)) {
            throw NumericalError("train: non-finite validation loss at epoch " +
                                 std::to_string(epoch));
        }
        result.history.push_back({epoch, train_loss, val_loss, lr});

        if (val_loss < best_val * (1.0 - cfg.improve_rel)) {
            best_val = val_loss;
            result.best_epoch = epoch;
            best.copy_state_from(graph);
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs >= cfg.patience) {
                if (ladder_idx + 1 < cfg.lr_ladder.size()) {
                    ++ladder_idx;
                    bad_epochs = 0;
                } else {
                    result.stopped_by_schedule = true;
                    break;
                }
            }
        }
    }
    if (result.best_epoch >= 0) graph.copy_state_from(best);
    result.best_val_loss = best_val;
    return result;
}

}  // namespace tp
