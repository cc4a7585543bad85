// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <vector>

#include "tp/tensor.hpp"

// Differentiable primitives. Every function computes the forward result and,
// when a tape is supplied and some input wants gradients, records the matching
// backward step. Passing tape == nullptr runs pure inference.
//
// Layout conventions: image batches are [N,C,H,W]; conv weights [Co,Ci,Kh,Kw];
// depthwise weights [C,Kh,Kw]; fully-connected weights [Co,Ci].

namespace tp::ops {

TensorPtr conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int pad);
TensorPtr depthwise_conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& w,
                           const TensorPtr& b, int stride, int pad);
TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b);

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr relu(Tape* tape, const TensorPtr& x);
TensorPtr relu6(Tape* tape, const TensorPtr& x);
TensorPtr scale(Tape* tape, const TensorPtr& x, const TensorPtr& alpha);
TensorPtr flatten(Tape* tape, const TensorPtr& x);

TensorPtr concat_channels(Tape* tape, const std::vector<TensorPtr>& xs);
std::vector<TensorPtr> split_channels(Tape* tape, const TensorPtr& x,
                                      const std::vector<int>& sizes);

/// Batch norm over the channel axis of [N,C,H,W] or [N,C]. Training mode uses
/// batch statistics and updates the running buffers in place (momentum 0.1
/// convention: running = (1-m)*running + m*batch, unbiased batch variance).
/// Inference mode is a pure affine map from the running statistics.
TensorPtr batch_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, const TensorPtr& run_mean,
                     const TensorPtr& run_var, bool training, double momentum, double eps);

TensorPtr global_avg_pool(Tape* tape, const TensorPtr& x);

/// Mean over the batch of -log softmax(logits)[label]. Returns a scalar.
TensorPtr softmax_cross_entropy(Tape* tape, const TensorPtr& logits,
                                const std::vector<int>& labels);

/// Row-wise softmax probabilities (no tape; used by evaluation and tests).
std::vector<double> softmax_rows(const TensorPtr& logits);

/// Classic SGD with momentum: v <- momentum*v + grad; p <- p - lr*v.
/// All gradients must be populated; shapes must align pairwise.
void sgdm_step(const std::vector<TensorPtr>& params, std::vector<TensorPtr>& velocity,
               double lr, double momentum);

}  // namespace tp::ops
