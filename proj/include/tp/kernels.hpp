// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Low-level dense kernels. tp::kern holds the OpenMP implementations used by
// the ops layer; tp::ref holds serial reference implementations kept for
// testing and benchmarking. Both share these signatures, all buffers are
// row-major, and backward kernels ACCUMULATE into their output buffers.
//
// Parallel loops are arranged so every output element is written by exactly
// one thread with a fixed inner summation order, which makes results
// bit-identical for any thread count.

namespace tp {

struct ConvDims {
    int n;       // batch
    int ci;      // input channels
    int h, w;    // input spatial
    int co;      // output channels
    int kh, kw;  // kernel
    int stride;
    int pad;
    int ho, wo;  // output spatial
};

#define TP_KERNEL_DECLS                                                                     \
    void conv2d_forward(const double* x, const double* w, const double* b, double* y,      \
                        const ConvDims& d);                                                 \
    void conv2d_backward_input(const double* dy, const double* w, double* dx,               \
                               const ConvDims& d);                                          \
    void conv2d_backward_params(const double* x, const double* dy, double* dw, double* db,  \
                                const ConvDims& d);                                         \
    void dwconv2d_forward(const double* x, const double* w, const double* b, double* y,     \
                          const ConvDims& d);                                               \
    void dwconv2d_backward_input(const double* dy, const double* w, double* dx,             \
                                 const ConvDims& d);                                        \
    void dwconv2d_backward_params(const double* x, const double* dy, double* dw,            \
                                  double* db, const ConvDims& d);                           \
    void linear_forward(const double* x, const double* w, const double* b, double* y,       \
                        int n, int ci, int co);                                             \
    void linear_backward_input(const double* dy, const double* w, double* dx, int n,        \
                               int ci, int co);                                             \
    void linear_backward_params(const double* x, const double* dy, double* dw, double* db,  \
                                int n, int ci, int co);

namespace kern {
TP_KERNEL_DECLS
}

namespace ref {
TP_KERNEL_DECLS
}

#undef TP_KERNEL_DECLS

}  // namespace tp
