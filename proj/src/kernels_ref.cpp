// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

// Single-threaded reference kernels. Deliberately plain loops, kept as the
// ground truth the OpenMP kernels are checked against.

#include "tp/kernels.hpp"

namespace tp::ref {

namespace {
inline long idx4(int a, int b, int c, int d, int nb, int nc, int nd) {
    return ((static_cast<long>(a) * nb + b) * nc + c) * nd + d;
}
}  // namespace

void conv2d_forward(const double* x, const double* w, const double* b, double* y,
                    const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
            for (int oh = 0; oh < d.ho; ++oh)
                for (int ow = 0; ow < d.wo; ++ow) {
                    double acc = b ? b[co] : 0.0;
                    for (int ci = 0; ci < d.ci; ++ci)
                        for (int i = 0; i < d.kh; ++i)
                            for (int j = 0; j < d.kw; ++j) {
                                int ih = oh * d.stride - d.pad + i;
                                int iw = ow * d.stride - d.pad + j;
                                if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                                acc += x[idx4(n, ci, ih, iw, d.ci, d.h, d.w)] *
                                       w[idx4(co, ci, i, j, d.ci, d.kh, d.kw)];
                            }
                    y[idx4(n, co, oh, ow, d.co, d.ho, d.wo)] = acc;
                }
}

void conv2d_backward_input(const double* dy, const double* w, double* dx, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co)
            for (int oh = 0; oh < d.ho; ++oh)
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = dy[idx4(n, co, oh, ow, d.co, d.ho, d.wo)];
                    for (int ci = 0; ci < d.ci; ++ci)
                        for (int i = 0; i < d.kh; ++i)
                            for (int j = 0; j < d.kw; ++j) {
                                int ih = oh * d.stride - d.pad + i;
                                int iw = ow * d.stride - d.pad + j;
                                if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                                dx[idx4(n, ci, ih, iw, d.ci, d.h, d.w)] +=
                                    g * w[idx4(co, ci, i, j, d.ci, d.kh, d.kw)];
                            }
                }
}

void conv2d_backward_params(const double* x, const double* dy, double* dw, double* db,
                            const ConvDims& d) {
    for (int co = 0; co < d.co; ++co) {
        double bacc = 0.0;
        for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < d.ho; ++oh)
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = dy[idx4(n, co, oh, ow, d.co, d.ho, d.wo)];
                    bacc += g;
                    for (int ci = 0; ci < d.ci; ++ci)
                        for (int i = 0; i < d.kh; ++i)
                            for (int j = 0; j < d.kw; ++j) {
                                int ih = oh * d.stride - d.pad + i;
                                int iw = ow * d.stride - d.pad + j;
                                if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                                dw[idx4(co, ci, i, j, d.ci, d.kh, d.kw)] +=
                                    g * x[idx4(n, ci, ih, iw, d.ci, d.h, d.w)];
                            }
                }
        if (db) db[co] += bacc;
    }
}

void dwconv2d_forward(const double* x, const double* w, const double* b, double* y,
                      const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ci; ++c)
            for (int oh = 0; oh < d.ho; ++oh)
                for (int ow = 0; ow < d.wo; ++ow) {
                    double acc = b ? b[c] : 0.0;
                    for (int i = 0; i < d.kh; ++i)
                        for (int j = 0; j < d.kw; ++j) {
                            int ih = oh * d.stride - d.pad + i;
                            int iw = ow * d.stride - d.pad + j;
                            if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                            acc += x[idx4(n, c, ih, iw, d.ci, d.h, d.w)] *
                                   w[(static_cast<long>(c) * d.kh + i) * d.kw + j];
                        }
                    y[idx4(n, c, oh, ow, d.ci, d.ho, d.wo)] = acc;
                }
}

void dwconv2d_backward_input(const double* dy, const double* w, double* dx, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.ci; ++c)
            for (int oh = 0; oh < d.ho; ++oh)
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = dy[idx4(n, c, oh, ow, d.ci, d.ho, d.wo)];
                    for (int i = 0; i < d.kh; ++i)
                        for (int j = 0; j < d.kw; ++j) {
                            int ih = oh * d.stride - d.pad + i;
                            int iw = ow * d.stride - d.pad + j;
                            if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                            dx[idx4(n, c, ih, iw, d.ci, d.h, d.w)] +=
                                g * w[(static_cast<long>(c) * d.kh + i) * d.kw + j];
                        }
                }
}

void dwconv2d_backward_params(const double* x, const double* dy, double* dw, double* db,
                              const ConvDims& d) {
    for (int c = 0; c < d.ci; ++c) {
        double bacc = 0.0;
        for (int n = 0; n < d.n; ++n)
            for (int oh = 0; oh < d.ho; ++oh)
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = dy[idx4(n, c, oh, ow, d.ci, d.ho, d.wo)];
                    bacc += g;
                    for (int i = 0; i < d.kh; ++i)
                        for (int j = 0; j < d.kw; ++j) {
                            int ih = oh * d.stride - d.pad + i;
                            int iw = ow * d.stride - d.pad + j;
                            if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                            dw[(static_cast<long>(c) * d.kh + i) * d.kw + j] +=
                                g * x[idx4(n, c, ih, iw, d.ci, d.h, d.w)];
                        }
                }
        if (db) db[c] += bacc;
    }
}

void linear_forward(const double* x, const double* w, const double* b, double* y,
                    int n, int ci, int co) {
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < co; ++o) {
            double acc = b ? b[o] : 0.0;
            for (int c = 0; c < ci; ++c)
                acc += x[static_cast<long>(i) * ci + c] * w[static_cast<long>(o) * ci + c];
            y[static_cast<long>(i) * co + o] = acc;
        }
}

void linear_backward_input(const double* dy, const double* w, double* dx, int n, int ci, int co) {
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < co; ++o) {
            double g = dy[static_cast<long>(i) * co + o];
            for (int c = 0; c < ci; ++c)
                dx[static_cast<long>(i) * ci + c] += g * w[static_cast<long>(o) * ci + c];
        }
}

void linear_backward_params(const double* x, const double* dy, double* dw, double* db,
                            int n, int ci, int co) {
    for (int o = 0; o < co; ++o) {
        double bacc = 0.0;
        for (int i = 0; i < n; ++i) {
            double g = dy[static_cast<long>(i) * co + o];
            bacc += g;
            for (int c = 0; c < ci; ++c)
                dw[static_cast<long>(o) * ci + c] += g * x[static_cast<long>(i) * ci + c];
        }
        if (db) db[o] += bacc;
    }
}

}  // namespace tp::ref
