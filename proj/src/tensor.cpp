// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/tensor.hpp"

#include <cmath>
#include <sstream>

namespace tp {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor extent must be positive, got " + std::to_string(e));
        n *= e;
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
}

TensorPtr Tensor::zeros(std::vector<int> shape) {
    auto n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

TensorPtr Tensor::full(std::vector<int> shape, double value) {
    auto n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

TensorPtr Tensor::from(std::vector<int> shape, std::vector<double> values) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values));
}

TensorPtr Tensor::scalar(double value) {
    return std::make_shared<Tensor>(std::vector<int>{1}, std::vector<double>{value});
}

int Tensor::dim(int i) const {
    if (i < 0 || i >= rank()) {
        throw ShapeError("dim index " + std::to_string(i) + " out of range for " + shape_str());
    }
    return shape[static_cast<std::size_t>(i)];
}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty()) grad.assign(data.size(), 0.0);
}

TensorPtr Tensor::clone() const {
    auto t = std::make_shared<Tensor>(shape, data);
    t->requires_grad = requires_grad;
    return t;
}

std::string Tensor::shape_str() const { return shape_to_string(shape); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 kept away from zero so log stays finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw Error("uniform_int: empty range");
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return lo + static_cast<std::int64_t>(next_u64());  // full 64-bit range
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return lo + static_cast<std::int64_t>(v % span);
}

std::uint64_t fnv1a_bytes(const void* bytes, std::size_t n, std::uint64_t basis) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = basis;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a(std::string_view text) {
    return fnv1a_bytes(text.data(), text.size(), 14695981039346656037ULL);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    return splitmix64(base ^ fnv1a(label));
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
    return splitmix64(derive_seed(base, label) ^ splitmix64(index + 0x51ed270b));
}

void Tape::backward(const TensorPtr& loss) {
    if (!loss) throw Error("backward: null loss");
    if (loss->numel() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + loss->shape_str());
    }
    backward_from(loss, {1.0});
}

void Tape::backward_from(const TensorPtr& output, const std::vector<double>& seed) {
    if (!output) throw Error("backward: null output");
    if (steps_.empty()) throw Error("backward: tape is empty");
    if (seed.size() != output->data.size()) {
        throw ShapeError("backward: seed size " + std::to_string(seed.size()) +
                         " does not match output " + output->shape_str());
    }
    output->ensure_grad();
    output->grad = seed;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
}

}  // namespace tp
