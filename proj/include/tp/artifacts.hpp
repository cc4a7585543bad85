// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tp/explain.hpp"
#include "tp/pruner.hpp"
#include "tp/trainer.hpp"
#include "tp/verify.hpp"

namespace tp {

/// All CSV artifacts start with "# config_hash=0x<16 hex digits>".
std::string hash_header(std::uint64_t config_hash);

/// Reads the hash header back; IoError when missing/malformed.
std::uint64_t read_hash_header(const std::filesystem::path& path);

std::string format_double(double v);

void write_train_history_csv(const std::filesystem::path& path,
                             const std::vector<EpochRecord>& history,
                             std::uint64_t config_hash);

/// Columns: iteration, pruned_fraction, learnables, embedding_size,
/// eer_1to1, eer_5to5 (blank when not evaluated).
void write_trajectory_csv(const std::filesystem::path& path, const PruneTrajectory& traj,
                          std::uint64_t config_hash);

/// Companion iteration x layer matrix of filter counts.
void write_filters_per_layer_csv(const std::filesystem::path& path, const PruneTrajectory& traj,
                                 std::uint64_t config_hash);

/// One row per removed group: iteration, group id, first node, origin width,
/// primary filter count, epoch-average score.
void write_removed_groups_csv(const std::filesystem::path& path, const PruneTrajectory& traj,
                              std::uint64_t config_hash);

/// Columns: subject_a, subject_b, pose_a, pose_b, template_size, score, label.
void write_scores_csv(const std::filesystem::path& path, const ScoreSet& scores,
                      std::uint64_t config_hash);

struct EerReportRow {
    int template_size = 1;
    int iteration = 0;
    double eer = 0.0;
    double threshold = 0.0;
};
void write_eer_report_csv(const std::filesystem::path& path,
                          const std::vector<EerReportRow>& rows, std::uint64_t config_hash);

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& map,
                       std::uint64_t config_hash);

/// Columns: bin_left, bin_right, count. The header records both EERs.
void write_psnr_histogram_csv(const std::filesystem::path& path, const PsnrHistogram& hist,
                              double eer_a, double eer_b, std::uint64_t config_hash);

// ---- minimal SVG line charts -------------------------------------------------

struct Series {
    std::string label;
    std::vector<double> x, y;
};

/// Polyline chart; skips NaN points. Axes are linear with simple tick labels.
void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series);

}  // namespace tp
