// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "tp/data.hpp"
#include "tp/graph.hpp"

namespace tp {

struct Descriptor {
    std::vector<double> values;
    int subject = 0;
    int pose = 0;
    int pose_index = 0;
};

struct Template {
    std::vector<double> values;  // arithmetic mean of member descriptors
    int subject = 0;
    int pose = 0;
    std::vector<int> member_indices;
};

struct ProtocolConfig {
    int subjects = 0;
    int images_per_pose = 10;
    int poses = 3;
    int template_size = 1;     // 1 or 5 descriptors per template
    int impostor_window = 100; // "next N users" rule, cyclic

    void validate() const;
};

struct ComparisonPair {
    int subject_a = 0, template_a = 0, pose_a = 0;
    int subject_b = 0, template_b = 0, pose_b = 0;
    bool genuine = false;
};

struct ScoreRecord {
    int subject_a = 0, subject_b = 0;
    int pose_a = 0, pose_b = 0;
    int template_size = 1;
    double score = 0.0;
    bool genuine = false;
};

struct ScoreSet {
    std::vector<ScoreRecord> records;
    int template_size = 1;
};

/// Comparison list: genuine pairs are every unordered template pair of a
/// subject (same-pose and cross-pose categories); impostor pairs compare a
/// subject's first template against the second template of each of the next
/// `impostor_window` subjects (cyclic), per pose category.
std::vector<ComparisonPair> build_protocol(const ProtocolConfig& cfg);

/// Embedding of the image averaged with its horizontally flipped counterpart,
/// after evaluation preprocessing.
Descriptor extract_descriptor(const NetworkGraph& graph, const TensorPtr& image,
                              int resize_short, int crop);

double cosine_score(std::span<const double> a, std::span<const double> b);

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

/// Equal error rate: FAR/FRR evaluated at all distinct-score thresholds with
/// linear interpolation at the sign change of FAR - FRR.
EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor);
EerResult compute_eer(const ScoreSet& scores);

/// Templates for every (subject, pose): consecutive chunks of template_size
/// descriptors, averaged.
std::vector<Template> build_templates(const std::vector<Descriptor>& descriptors,
                                      const ProtocolConfig& cfg);

/// Full protocol on a dataset: extract descriptors, build templates, score
/// every comparison pair with cosine similarity.
ScoreSet score_protocol(const NetworkGraph& graph, const Dataset& ds, const ProtocolConfig& cfg,
                        int resize_short, int crop);

}  // namespace tp
