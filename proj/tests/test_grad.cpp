// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

// Gradient oracle: every primitive's analytic gradient is checked against
// central finite differences (step 1e-5) on random shapes, in 64-bit
// precision. Inputs are drawn away from the ReLU/ReLU6 kinks so the
// difference quotient stays valid.

#include <functional>

#include "doctest.h"
#include "testutil.hpp"
#include "tp/ops.hpp"

using namespace tp;
using tptest::finite_diff_max_rel_error;
using tptest::LossWeights;
using tptest::random_tensor;

namespace {

constexpr double kTol = 1e-4;
constexpr int kCases = 100;

// draws values with |v| in [margin, 1.5] to stay clear of activation kinks
TensorPtr away_from_kinks(std::vector<int> shape, Rng& rng, double margin = 0.05) {
    auto t = Tensor::zeros(std::move(shape));
    for (auto& v : t->data) {
        double mag = rng.uniform(margin, 1.5);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

// runs fd-vs-analytic for every tensor in `params` against the weighted-sum
// head over `forward`'s output
void check_op(Rng& rng, const std::vector<TensorPtr>& params,
              const std::function<TensorPtr(Tape*)>& forward_fn) {
    for (const auto& p : params) p->requires_grad = true;
    Tape tape;
    auto y = forward_fn(&tape);
    LossWeights head(y->numel(), rng);
    for (const auto& p : params) p->zero_grad();
    tape.backward_from(y, head.w);
    auto eval_loss = [&]() { return head.apply(forward_fn(nullptr)); };
    for (const auto& p : params) {
        double err = finite_diff_max_rel_error(p, eval_loss);
        CHECK_MESSAGE(err < kTol, "max relative error ", err);
    }
}

}  // namespace

TEST_CASE("gradients: conv2d vs finite differences") {
    Rng rng(101);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 2));
        int ci = static_cast<int>(rng.uniform_int(1, 3));
        int co = static_cast<int>(rng.uniform_int(1, 3));
        int hw = static_cast<int>(rng.uniform_int(3, 6));
        int k = static_cast<int>(rng.uniform_int(1, 3));
        int stride = static_cast<int>(rng.uniform_int(1, 2));
        int pad = static_cast<int>(rng.uniform_int(0, 1));
        if (hw + 2 * pad < k) continue;
        auto x = random_tensor({n, ci, hw, hw}, rng);
        auto w = random_tensor({co, ci, k, k}, rng);
        auto b = random_tensor({co}, rng);
        check_op(rng, {x, w, b},
                 [&](Tape* tape) { return ops::conv2d(tape, x, w, b, stride, pad); });
    }
}

TEST_CASE("gradients: depthwise conv2d vs finite differences") {
    Rng rng(102);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 2));
        int c = static_cast<int>(rng.uniform_int(1, 4));
        int hw = static_cast<int>(rng.uniform_int(3, 6));
        int k = static_cast<int>(rng.uniform_int(1, 3));
        int stride = static_cast<int>(rng.uniform_int(1, 2));
        int pad = static_cast<int>(rng.uniform_int(0, 1));
        if (hw + 2 * pad < k) continue;
        auto x = random_tensor({n, c, hw, hw}, rng);
        auto w = random_tensor({c, k, k}, rng);
        auto b = random_tensor({c}, rng);
        check_op(rng, {x, w, b},
                 [&](Tape* tape) { return ops::depthwise_conv2d(tape, x, w, b, stride, pad); });
    }
}

TEST_CASE("gradients: linear vs finite differences") {
    Rng rng(103);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 4));
        int ci = static_cast<int>(rng.uniform_int(1, 6));
        int co = static_cast<int>(rng.uniform_int(1, 5));
        auto x = random_tensor({n, ci}, rng);
        auto w = random_tensor({co, ci}, rng);
        auto b = random_tensor({co}, rng);
        check_op(rng, {x, w, b}, [&](Tape* tape) { return ops::linear(tape, x, w, b); });
    }
}

TEST_CASE("gradients: add, scale, flatten vs finite differences") {
    Rng rng(104);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 3));
        int c = static_cast<int>(rng.uniform_int(1, 4));
        int hw = static_cast<int>(rng.uniform_int(2, 4));
        auto a = random_tensor({n, c, hw, hw}, rng);
        auto b = random_tensor({n, c, hw, hw}, rng);
        check_op(rng, {a, b}, [&](Tape* tape) { return ops::add(tape, a, b); });
        auto alpha = random_tensor({1}, rng, 0.3, 1.7);
        check_op(rng, {a, alpha}, [&](Tape* tape) { return ops::scale(tape, a, alpha); });
        check_op(rng, {a}, [&](Tape* tape) { return ops::flatten(tape, a); });
    }
}

TEST_CASE("gradients: relu and relu6 vs finite differences") {
    Rng rng(105);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 3));
        int c = static_cast<int>(rng.uniform_int(1, 4));
        int hw = static_cast<int>(rng.uniform_int(2, 4));
        auto x = away_from_kinks({n, c, hw, hw}, rng);
        check_op(rng, {x}, [&](Tape* tape) { return ops::relu(tape, x); });
        // scale into (0, 8) away from both kinks of relu6
        auto x6 = Tensor::zeros({n, c, hw, hw});
        for (auto& v : x6->data) {
            double m = rng.uniform(0.1, 7.9);
            v = (m > 5.9 && m < 6.1) ? 5.5 : m;
        }
        check_op(rng, {x6}, [&](Tape* tape) { return ops::relu6(tape, x6); });
    }
}

TEST_CASE("gradients: concat and split vs finite differences") {
    Rng rng(106);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 2));
        int hw = static_cast<int>(rng.uniform_int(2, 4));
        auto a = random_tensor({n, static_cast<int>(rng.uniform_int(1, 3)), hw, hw}, rng);
        auto b = random_tensor({n, static_cast<int>(rng.uniform_int(1, 3)), hw, hw}, rng);
        check_op(rng, {a, b},
                 [&](Tape* tape) { return ops::concat_channels(tape, {a, b}); });
        auto x = random_tensor({n, 4, hw, hw}, rng);
        check_op(rng, {x}, [&](Tape* tape) {
            auto parts = ops::split_channels(tape, x, {1, 3});
            return ops::concat_channels(tape, {parts[1], parts[0]});
        });
    }
}

TEST_CASE("gradients: batch norm (training mode) vs finite differences") {
    Rng rng(107);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(2, 4));
        int c = static_cast<int>(rng.uniform_int(1, 4));
        int hw = static_cast<int>(rng.uniform_int(2, 4));
        bool flat = rng.uniform() < 0.3;
        auto x = flat ? random_tensor({n * hw, c}, rng) : random_tensor({n, c, hw, hw}, rng);
        auto gamma = random_tensor({c}, rng, 0.5, 1.5);
        auto beta = random_tensor({c}, rng, -0.5, 0.5);
        auto rm = Tensor::zeros({c});
        auto rv = Tensor::full({c}, 1.0);
        check_op(rng, {x, gamma, beta}, [&](Tape* tape) {
            return ops::batch_norm(tape, x, gamma, beta, rm, rv, true, 0.1, 1e-5);
        });
    }
}

TEST_CASE("gradients: global average pool vs finite differences") {
    Rng rng(108);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 3));
        int c = static_cast<int>(rng.uniform_int(1, 4));
        int hw = static_cast<int>(rng.uniform_int(1, 5));
        auto x = random_tensor({n, c, hw, hw}, rng);
        check_op(rng, {x}, [&](Tape* tape) { return ops::global_avg_pool(tape, x); });
    }
}

TEST_CASE("gradients: softmax cross entropy vs finite differences") {
    Rng rng(109);
    for (int t = 0; t < kCases; ++t) {
        int n = static_cast<int>(rng.uniform_int(1, 4));
        int k = static_cast<int>(rng.uniform_int(2, 6));
        auto logits = random_tensor({n, k}, rng, -2.0, 2.0);
        std::vector<int> labels;
        for (int i = 0; i < n; ++i)
            labels.push_back(static_cast<int>(rng.uniform_int(0, k - 1)));
        logits->requires_grad = true;
        Tape tape;
        auto loss = ops::softmax_cross_entropy(&tape, logits, labels);
        logits->zero_grad();
        tape.backward(loss);
        auto eval_loss = [&]() {
            return ops::softmax_cross_entropy(nullptr, logits, labels)->data[0];
        };
        double err = finite_diff_max_rel_error(logits, eval_loss);
        CHECK_MESSAGE(err < kTol, "max relative error ", err);
    }
}

TEST_CASE("gradients: composite block (conv-bn-relu-dw-add-gap-fc) end to end") {
    Rng rng(110);
    for (int t = 0; t < 10; ++t) {
        int n = 2, ci = 2, co = 3, hw = 5;
        auto x = random_tensor({n, ci, hw, hw}, rng);
        auto w1 = random_tensor({co, ci, 3, 3}, rng);
        auto gamma = random_tensor({co}, rng, 0.5, 1.5);
        auto beta = random_tensor({co}, rng, -0.5, 0.5);
        auto wd = random_tensor({co, 3, 3}, rng);
        auto wf = random_tensor({4, co}, rng);
        auto bf = random_tensor({4}, rng);
        auto rm = Tensor::zeros({co});
        auto rv = Tensor::full({co}, 1.0);
        std::vector<TensorPtr> params{x, w1, gamma, beta, wd, wf, bf};
        // kept smooth on purpose: the per-primitive relu tests control their
        // own inputs to stay off the kink, which a composite cannot
        check_op(rng, params, [&](Tape* tape) {
            auto c1 = ops::conv2d(tape, x, w1, nullptr, 1, 1);
            auto b1 = ops::batch_norm(tape, c1, gamma, beta, rm, rv, true, 0.1, 1e-5);
            auto d1 = ops::depthwise_conv2d(tape, b1, wd, nullptr, 1, 1);
            auto s = ops::add(tape, d1, c1);
            auto g = ops::global_avg_pool(tape, s);
            return ops::linear(tape, g, wf, bf);
        });
    }
}
