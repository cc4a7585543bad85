// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tp/errors.hpp"

namespace tp {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense n-dimensional array of doubles with an optional gradient buffer.
/// Shapes use row-major layout; `grad`, when allocated, matches `data` in size.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty unless gradient tracking was requested
    bool requires_grad = false;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static TensorPtr zeros(std::vector<int> shape);
    static TensorPtr full(std::vector<int> shape, double value);
    static TensorPtr from(std::vector<int> shape, std::vector<double> values);
    static TensorPtr scalar(double value);

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const;

    bool has_grad() const { return !grad.empty(); }
    void ensure_grad();
    void zero_grad();

    TensorPtr clone() const;
    std::string shape_str() const;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

/// Deterministic RNG: a fully specified engine (mt19937_64) with hand-rolled
/// value mappings, so streams are reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (caches the spare draw).
    double normal();
    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    /// Uniform integer in [lo, hi], inclusive, rejection-sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<std::size_t>(i)],
                      v[static_cast<std::size_t>(uniform_int(0, i))]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t fnv1a(std::string_view text);
std::uint64_t fnv1a_bytes(const void* bytes, std::size_t n, std::uint64_t basis);
std::uint64_t splitmix64(std::uint64_t x);

/// Named sub-seed derivation: one global seed fans out to per-module streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index);

/// Reverse-mode tape. Every differentiable primitive pushes a closure that
/// scatters gradients into its inputs; backward() replays them in reverse.
class Tape {
public:
    void record(const char* op, std::function<void()> fn) {
        steps_.push_back({op, std::move(fn)});
    }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape. The loss must be a
    /// scalar produced while this tape was active.
    void backward(const TensorPtr& loss);

    /// Vector-Jacobian product: seeds `output`'s gradient with `seed` and
    /// replays the tape.
    void backward_from(const TensorPtr& output, const std::vector<double>& seed);

    bool empty() const { return steps_.empty(); }
    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

private:
    struct Step {
        const char* op;
        std::function<void()> fn;
    };
    std::vector<Step> steps_;
};

}  // namespace tp
