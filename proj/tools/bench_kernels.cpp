// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

// Compares the OpenMP kernels against the serial reference implementations
// on training-shaped workloads and prints a timing table.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "tp/kernels.hpp"
#include "tp/tensor.hpp"

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<double> random_vec(std::size_t n, tp::Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    int threads = argc > 1 ? std::atoi(argv[1]) : omp_get_num_procs();
    int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    omp_set_num_threads(threads);
    std::printf("kernel benchmark: %d threads, %d reps per measurement\n\n", threads, reps);
    std::printf("%-28s %12s %12s %9s\n", "kernel", "serial (ms)", "openmp (ms)", "speedup");

    tp::Rng rng(7);
    struct Case {
        const char* name;
        tp::ConvDims d;
    };
    std::vector<Case> conv_cases = {
        {"conv2d 16x3x64x64 k3 co32", {16, 3, 64, 64, 32, 3, 3, 1, 1, 64, 64}},
        {"conv2d 32x16x24x24 k3 co32", {32, 16, 24, 24, 32, 3, 3, 1, 1, 24, 24}},
        {"conv2d 8x32x32x32 k1 co64", {8, 32, 32, 32, 64, 1, 1, 1, 0, 32, 32}},
    };
    for (const auto& c : conv_cases) {
        const auto& d = c.d;
        auto x = random_vec(static_cast<std::size_t>(d.n) * d.ci * d.h * d.w, rng);
        auto w = random_vec(static_cast<std::size_t>(d.co) * d.ci * d.kh * d.kw, rng);
        std::vector<double> y(static_cast<std::size_t>(d.n) * d.co * d.ho * d.wo);
        double ts = time_ms([&] { tp::ref::conv2d_forward(x.data(), w.data(), nullptr, y.data(), d); }, reps);
        double tp_ = time_ms([&] { tp::kern::conv2d_forward(x.data(), w.data(), nullptr, y.data(), d); }, reps);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n", c.name, ts, tp_, ts / tp_);

        auto dy = random_vec(y.size(), rng);
        std::vector<double> dx(x.size());
        std::vector<double> dw(w.size());
        ts = time_ms([&] { tp::ref::conv2d_backward_params(x.data(), dy.data(), dw.data(), nullptr, d); }, reps);
        tp_ = time_ms([&] { tp::kern::conv2d_backward_params(x.data(), dy.data(), dw.data(), nullptr, d); }, reps);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n", "  backward params", ts, tp_, ts / tp_);
        ts = time_ms([&] { tp::ref::conv2d_backward_input(dy.data(), w.data(), dx.data(), d); }, reps);
        tp_ = time_ms([&] { tp::kern::conv2d_backward_input(dy.data(), w.data(), dx.data(), d); }, reps);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n", "  backward input", ts, tp_, ts / tp_);
    }

    {
        tp::ConvDims d{32, 64, 24, 24, 64, 3, 3, 1, 1, 24, 24};
        auto x = random_vec(static_cast<std::size_t>(d.n) * d.ci * d.h * d.w, rng);
        auto w = random_vec(static_cast<std::size_t>(d.ci) * d.kh * d.kw, rng);
        std::vector<double> y(static_cast<std::size_t>(d.n) * d.ci * d.ho * d.wo);
        double ts = time_ms([&] { tp::ref::dwconv2d_forward(x.data(), w.data(), nullptr, y.data(), d); }, reps);
        double tp_ = time_ms([&] { tp::kern::dwconv2d_forward(x.data(), w.data(), nullptr, y.data(), d); }, reps);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n", "dwconv2d 32x64x24x24 k3", ts, tp_, ts / tp_);
    }

    {
        int n = 256, ci = 1024, co = 512;
        auto x = random_vec(static_cast<std::size_t>(n) * ci, rng);
        auto w = random_vec(static_cast<std::size_t>(co) * ci, rng);
        std::vector<double> y(static_cast<std::size_t>(n) * co);
        double ts = time_ms([&] { tp::ref::linear_forward(x.data(), w.data(), nullptr, y.data(), n, ci, co); }, reps);
        double tp_ = time_ms([&] { tp::kern::linear_forward(x.data(), w.data(), nullptr, y.data(), n, ci, co); }, reps);
        std::printf("%-28s %12.3f %12.3f %8.2fx\n", "linear 256x1024 -> 512", ts, tp_, ts / tp_);
    }
    return 0;
}
