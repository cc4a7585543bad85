// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tp/builders.hpp"
#include "tp/graph.hpp"
#include "tp/tensor.hpp"

namespace tptest {

inline tp::TensorPtr random_tensor(std::vector<int> shape, tp::Rng& rng, double lo = -1.0,
                                   double hi = 1.0, bool requires_grad = false) {
    auto t = tp::Tensor::zeros(std::move(shape));
    for (auto& v : t->data) v = rng.uniform(lo, hi);
    t->requires_grad = requires_grad;
    return t;
}

/// Central finite differences of a scalar function against the analytic
/// gradient stored on `param`; returns the max relative error with the
/// denominator floored at 1e-3 to keep near-zero entries meaningful.
inline double finite_diff_max_rel_error(const tp::TensorPtr& param,
                                        const std::function<double()>& eval_loss,
                                        double step = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < param->data.size(); ++i) {
        double keep = param->data[i];
        param->data[i] = keep + step;
        double up = eval_loss();
        param->data[i] = keep - step;
        double down = eval_loss();
        param->data[i] = keep;
        double fd = (up - down) / (2.0 * step);
        double an = param->grad[i];
        double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
        worst = std::max(worst, std::fabs(fd - an) / denom);
    }
    return worst;
}

/// Weighted sum of a tensor's entries with fixed random weights: a smooth
/// scalar head for gradient checks.
struct LossWeights {
    std::vector<double> w;
    explicit LossWeights(std::int64_t n, tp::Rng& rng) {
        w.resize(static_cast<std::size_t>(n));
        for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    }
    double apply(const tp::TensorPtr& y) const {
        double s = 0.0;
        for (std::size_t i = 0; i < y->data.size(); ++i) s += w[i] * y->data[i];
        return s;
    }
    void seed_grad(const tp::TensorPtr& y) const {
        y->ensure_grad();
        for (std::size_t i = 0; i < y->grad.size(); ++i) y->grad[i] = w[i];
    }
};

/// Tiny sequential classification net: conv(c1,3x3) -> bn -> relu ->
/// conv(c2,3x3) -> bn -> relu -> gap -> fc(classes). Used wherever tests need
/// a graph smaller than the three families.
inline tp::NetworkGraph make_two_conv_net(int in_c, int in_hw, int c1, int c2, int classes,
                                          tp::Rng& rng) {
    tp::ScaleConfig cfg;
    cfg.family = "fire-net";  // reuse the builder's init helpers via a fire config
    (void)cfg;
    tp::NetworkGraph g;
    g.family = "two-conv";
    g.input_h = g.input_w = in_hw;
    g.input_c = in_c;
    auto conv_w = [&](int co, int ci, int k) {
        auto w = tp::Tensor::zeros({co, ci, k, k});
        double sigma = std::sqrt(2.0 / (ci * k * k));
        for (auto& v : w->data)
            v = static_cast<double>(static_cast<float>(rng.normal(0.0, sigma)));
        w->requires_grad = true;
        return w;
    };
    auto vec = [&](int c, double val, bool learn) {
        auto t = tp::Tensor::full({c}, val);
        t->requires_grad = learn;
        return t;
    };
    tp::LayerNode input;
    input.id = "input";
    input.kind = tp::LayerKind::Input;
    g.nodes.push_back(input);
    auto add_conv = [&](const std::string& id, const std::string& in, int co, int ci) {
        tp::LayerNode c;
        c.id = id;
        c.kind = tp::LayerKind::Conv;
        c.inputs = {in};
        c.kernel_h = c.kernel_w = 3;
        c.stride = 1;
        c.pad = 1;
        c.weight = conv_w(co, ci, 3);
        g.nodes.push_back(c);
        tp::LayerNode b;
        b.id = id + "_bn";
        b.kind = tp::LayerKind::BatchNorm;
        b.inputs = {id};
        b.gamma = vec(co, 1.0, true);
        b.beta = vec(co, 0.0, true);
        b.run_mean = vec(co, 0.0, false);
        b.run_var = vec(co, 1.0, false);
        g.nodes.push_back(b);
        tp::LayerNode r;
        r.id = id + "_relu";
        r.kind = tp::LayerKind::ReLU;
        r.inputs = {id + "_bn"};
        g.nodes.push_back(r);
        return id + "_relu";
    };
    auto x = add_conv("conv1", "input", c1, in_c);
    x = add_conv("conv2", x, c2, c1);
    tp::LayerNode gap;
    gap.id = "embedding";
    gap.kind = tp::LayerKind::GlobalAvgPool;
    gap.inputs = {x};
    g.nodes.push_back(gap);
    tp::LayerNode fc;
    fc.id = "head";
    fc.kind = tp::LayerKind::FullyConnected;
    fc.inputs = {"embedding"};
    fc.weight = tp::Tensor::zeros({classes, c2});
    for (auto& v : fc.weight->data)
        v = static_cast<double>(static_cast<float>(rng.normal(0.0, std::sqrt(1.0 / c2))));
    fc.weight->requires_grad = true;
    fc.bias = vec(classes, 0.0, true);
    g.nodes.push_back(fc);
    g.embedding_node = "embedding";
    g.head_node = "head";
    g.validate();
    return g;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> order(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> r(v.size());
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
            double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    auto ra = ranks(a), rb = ranks(b);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double num = 0, da = 0, db = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    return num / std::sqrt(da * db);
}

}  // namespace tptest
