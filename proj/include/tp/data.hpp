// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tp/tensor.hpp"

namespace tp {

struct Sample {
    TensorPtr image;  // [C,H,W]
    int label = 0;
    int pose = 0;
    int pose_index = 0;  // position within (identity, pose)
};

struct Dataset {
    std::vector<Sample> samples;
    int class_count = 0;
    int poses = 0;
    int images_per_pose = 0;
    int height = 0, width = 0, channels = 0;
    std::vector<int> train_indices, val_indices;
};

struct SyntheticIdentityConfig {
    int identities = 10;
    int images_per_identity = 30;  // spread evenly over the poses
    int image_size = 26;
    int poses = 3;  // frontal, three-quarter, profile (increasing shear)
    double noise_level = 0.05;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Deterministic identity dataset: each identity is a distinct parametric
/// pattern rendered under per-pose horizontal shear/shift transforms with
/// additive Gaussian noise.
Dataset generate_synthetic_identities(const SyntheticIdentityConfig& cfg);

/// Fills train/val index lists; per class floor(fraction * n) validation
/// images, at least 1 when the class has more than one sample, spread evenly
/// across the class's samples.
void split_train_val(Dataset& ds, double val_fraction);

// ---- image geometry ---------------------------------------------------------

TensorPtr resize_short_side(const TensorPtr& image, int target);
TensorPtr centre_crop(const TensorPtr& image, int size);
TensorPtr hflip(const TensorPtr& image);

/// Training-path augmentation: resize short side, random crop, horizontal
/// flip with probability 0.5. Draw order from `rng`: row offset, col offset,
/// flip coin.
TensorPtr augment(const TensorPtr& image, int resize_target, int crop, Rng& rng);

/// Evaluation-path preprocessing: resize short side then centre crop.
TensorPtr eval_preprocess(const TensorPtr& image, int resize_target, int crop);

/// Stacks dataset samples into a [N,C,H,W] batch after per-image preprocessing.
TensorPtr batch_images(const std::vector<TensorPtr>& images);

// ---- dataset file -----------------------------------------------------------

void save_dataset(const std::filesystem::path& path, const Dataset& ds,
                  std::uint64_t config_hash);
Dataset load_dataset(const std::filesystem::path& path, std::uint64_t* config_hash = nullptr);

}  // namespace tp
