// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tp {

void ProtocolConfig::validate() const {
    if (subjects < 2) throw ConfigError("verify: need at least 2 subjects");
    if (poses < 1) throw ConfigError("verify: need at least 1 pose");
    if (images_per_pose < 1) throw ConfigError("verify: need images per pose");
    if (template_size != 1 && template_size != 5)
        throw ConfigError("verify: template size must be 1 or 5");
    if (images_per_pose % template_size != 0)
        throw ConfigError("verify: images_per_pose must be divisible by template size");
    int templates = images_per_pose / template_size;
    if (templates < 2)
        throw ConfigError("verify: need at least 2 templates per pose for impostor pairing");
    if (impostor_window < 1) throw ConfigError("verify: impostor window must be >= 1");
    if (subjects <= impostor_window) {
        throw ConfigError("verify: 'next " + std::to_string(impostor_window) +
                          " users' rule needs more than " + std::to_string(impostor_window) +
                          " subjects; reduce the impostor window");
    }
}

std::vector<ComparisonPair> build_protocol(const ProtocolConfig& cfg) {
    cfg.validate();
    int t = cfg.images_per_pose / cfg.template_size;  // templates per (subject, pose)
    std::vector<ComparisonPair> pairs;

    // genuine, same pose: all unordered template pairs of a subject
    for (int p = 0; p < cfg.poses; ++p)
        for (int s = 0; s < cfg.subjects; ++s)
            for (int a = 0; a < t; ++a)
                for (int b = a + 1; b < t; ++b)
                    pairs.push_back({s, a, p, s, b, p, true});

    // genuine, cross pose: full template cross product per pose pair
    for (int p = 0; p < cfg.poses; ++p)
        for (int q = p + 1; q < cfg.poses; ++q)
            for (int s = 0; s < cfg.subjects; ++s)
                for (int a = 0; a < t; ++a)
                    for (int b = 0; b < t; ++b)
                        pairs.push_back({s, a, p, s, b, q, true});

    // impostor: first template vs second template of the next `window`
    // subjects (cyclic), one category per same-pose type and pose pair
    for (int p = 0; p < cfg.poses; ++p)
        for (int s = 0; s < cfg.subjects; ++s)
            for (int j = 1; j <= cfg.impostor_window; ++j)
                pairs.push_back({s, 0, p, (s + j) % cfg.subjects, 1, p, false});
    for (int p = 0; p < cfg.poses; ++p)
        for (int q = p + 1; q < cfg.poses; ++q)
            for (int s = 0; s < cfg.subjects; ++s)
                for (int j = 1; j <= cfg.impostor_window; ++j)
                    pairs.push_back({s, 0, p, (s + j) % cfg.subjects, 1, q, false});
    return pairs;
}

Descriptor extract_descriptor(const NetworkGraph& graph, const TensorPtr& image,
                              int resize_short, int crop) {
    auto prepped = eval_preprocess(image, resize_short, crop);
    auto batch = batch_images({prepped, hflip(prepped)});
    auto out = forward(graph, batch, /*training=*/false, nullptr);
    int c = out.embedding->dim(1);
    Descriptor d;
    d.values.resize(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) {
        d.values[static_cast<std::size_t>(k)] =
            (out.embedding->data[static_cast<std::size_t>(k)] +
             out.embedding->data[static_cast<std::size_t>(c + k)]) /
            2.0;
    }
    return d;
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("cosine_score: dimension mismatch");
    if (a.empty()) throw ShapeError("cosine_score: empty vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw NumericalError("cosine_score: zero-norm input");
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
    if (genuine.empty() || impostor.empty())
        throw Error("compute_eer: a label class is empty");
    std::vector<double> g(genuine.begin(), genuine.end());
    std::vector<double> im(impostor.begin(), impostor.end());
    std::sort(g.begin(), g.end());
    std::sort(im.begin(), im.end());

    // candidate thresholds: sentinels below/above every score plus all
    // distinct scores; FAR(t) = P(impostor >= t), FRR(t) = P(genuine < t)
    std::vector<double> ts;
    ts.reserve(g.size() + im.size() + 2);
    double lo = std::min(g.front(), im.front());
    double hi = std::max(g.back(), im.back());
    ts.push_back(lo - 1.0);
    for (std::size_t i = 0, j = 0; i < g.size() || j < im.size();) {
        double v;
        if (j >= im.size() || (i < g.size() && g[i] <= im[j])) v = g[i++];
        else v = im[j++];
        if (ts.empty() || v != ts.back()) ts.push_back(v);
    }
    ts.push_back(hi + 1.0);

    auto far_at = [&](double t) {
        auto it = std::lower_bound(im.begin(), im.end(), t);
        return static_cast<double>(im.end() - it) / static_cast<double>(im.size());
    };
    auto frr_at = [&](double t) {
        auto it = std::lower_bound(g.begin(), g.end(), t);
        return static_cast<double>(it - g.begin()) / static_cast<double>(g.size());
    };

    double prev_t = ts.front();
    double prev_far = far_at(prev_t), prev_frr = frr_at(prev_t);
    double prev_d = prev_far - prev_frr;  // starts at +1
    for (std::size_t k = 1; k < ts.size(); ++k) {
        double t = ts[k];
        double far = far_at(t), frr = frr_at(t);
        double d = far - frr;
        if (d <= 0.0) {
            if (d == 0.0) return {far, t};
            double alpha = prev_d / (prev_d - d);  // linear crossing
            double eer = prev_far + alpha * (far - prev_far);
            double thr = prev_t + alpha * (t - prev_t);
            return {eer, thr};
        }
        prev_t = t;
        prev_far = far;
        prev_frr = frr;
        prev_d = d;
    }
    // unreachable: the upper sentinel forces FAR=0, FRR=1
    throw NumericalError("compute_eer: no crossing found");
}

EerResult compute_eer(const ScoreSet& scores) {
    std::vector<double> g, im;
    for (const auto& r : scores.records) (r.genuine ? g : im).push_back(r.score);
    return compute_eer(g, im);
}

std::vector<Template> build_templates(const std::vector<Descriptor>& descriptors,
                                      const ProtocolConfig& cfg) {
    cfg.validate();
    // bucket by (subject, pose), ordered by pose_index
    std::map<std::pair<int, int>, std::vector<const Descriptor*>> buckets;
    for (const auto& d : descriptors) buckets[{d.subject, d.pose}].push_back(&d);
    std::vector<Template> out;
    for (auto& [key, list] : buckets) {
        std::sort(list.begin(), list.end(), [](const Descriptor* a, const Descriptor* b) {
            return a->pose_index < b->pose_index;
        });
        if (static_cast<int>(list.size()) != cfg.images_per_pose) {
            throw Error("build_templates: subject " + std::to_string(key.first) + " pose " +
                        std::to_string(key.second) + " has " + std::to_string(list.size()) +
                        " descriptors, expected " + std::to_string(cfg.images_per_pose));
        }
        int t = cfg.images_per_pose / cfg.template_size;
        for (int k = 0; k < t; ++k) {
            Template tpl;
            tpl.subject = key.first;
            tpl.pose = key.second;
            tpl.values.assign(list.front()->values.size(), 0.0);
            for (int m = 0; m < cfg.template_size; ++m) {
                const auto* d = list[static_cast<std::size_t>(k * cfg.template_size + m)];
                tpl.member_indices.push_back(d->pose_index);
                for (std::size_t i = 0; i < tpl.values.size(); ++i) tpl.values[i] += d->values[i];
            }
            for (auto& v : tpl.values) v /= static_cast<double>(cfg.template_size);
            out.push_back(std::move(tpl));
        }
    }
    return out;
}

ScoreSet score_protocol(const NetworkGraph& graph, const Dataset& ds, const ProtocolConfig& cfg,
                        int resize_short, int crop) {
    cfg.validate();
    if (ds.class_count != cfg.subjects)
        throw ConfigError("verify: protocol subjects != dataset classes");
    std::vector<Descriptor> descriptors(ds.samples.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        auto d = extract_descriptor(graph, s.image, resize_short, crop);
        d.subject = s.label;
        d.pose = s.pose;
        d.pose_index = s.pose_index;
        descriptors[i] = std::move(d);
    }
    auto templates = build_templates(descriptors, cfg);
    int t = cfg.images_per_pose / cfg.template_size;
    // build_templates emits (subject, pose) buckets in sorted order
    auto find_template = [&](int subject, int pose, int index) -> const Template& {
        std::size_t at =
            (static_cast<std::size_t>(subject) * cfg.poses + static_cast<std::size_t>(pose)) *
                static_cast<std::size_t>(t) +
            static_cast<std::size_t>(index);
        const auto& tpl = templates.at(at);
        if (tpl.subject != subject || tpl.pose != pose)
            throw Error("score_protocol: template table out of order");
        return tpl;
    };

    ScoreSet out;
    out.template_size = cfg.template_size;
    auto pairs = build_protocol(cfg);
    out.records.reserve(pairs.size());
    for (const auto& p : pairs) {
        const auto& a = find_template(p.subject_a, p.pose_a, p.template_a);
        const auto& b = find_template(p.subject_b, p.pose_b, p.template_b);
        double s = cosine_score(a.values, b.values);
        out.records.push_back(
            {p.subject_a, p.subject_b, p.pose_a, p.pose_b, cfg.template_size, s, p.genuine});
    }
    return out;
}

}  // namespace tp
