// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/kernels.hpp"

namespace tp::kern {

void conv2d_forward(const double* x, const double* w, const double* b, double* y,
                    const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int co = 0; co < d.co; ++co) {
            const double* wc = w + static_cast<long>(co) * d.ci * d.kh * d.kw;
            double* yc = y + (static_cast<long>(n) * d.co + co) * d.ho * d.wo;
            for (int oh = 0; oh < d.ho; ++oh) {
                for (int ow = 0; ow < d.wo; ++ow) {
                    double acc = b ? b[co] : 0.0;
                    for (int ci = 0; ci < d.ci; ++ci) {
                        const double* xc = x + (static_cast<long>(n) * d.ci + ci) * d.h * d.w;
                        const double* wk = wc + static_cast<long>(ci) * d.kh * d.kw;
                        for (int i = 0; i < d.kh; ++i) {
                            int ih = oh * d.stride - d.pad + i;
                            if (ih < 0 || ih >= d.h) continue;
                            for (int j = 0; j < d.kw; ++j) {
                                int iw = ow * d.stride - d.pad + j;
                                if (iw < 0 || iw >= d.w) continue;
                                acc += xc[ih * d.w + iw] * wk[i * d.kw + j];
                            }
                        }
                    }
                    yc[oh * d.wo + ow] = acc;
                }
            }
        }
    }
}

void conv2d_backward_input(const double* dy, const double* w, double* dx, const ConvDims& d) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int co = 0; co < d.co; ++co) {
            const double* wc = w + static_cast<long>(co) * d.ci * d.kh * d.kw;
            const double* gc = dy + (static_cast<long>(n) * d.co + co) * d.ho * d.wo;
            for (int oh = 0; oh < d.ho; ++oh) {
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = gc[oh * d.wo + ow];
                    if (g == 0.0) continue;
                    for (int ci = 0; ci < d.ci; ++ci) {
                        double* xc = dx + (static_cast<long>(n) * d.ci + ci) * d.h * d.w;
                        const double* wk = wc + static_cast<long>(ci) * d.kh * d.kw;
                        for (int i = 0; i < d.kh; ++i) {
                            int ih = oh * d.stride - d.pad + i;
                            if (ih < 0 || ih >= d.h) continue;
                            for (int j = 0; j < d.kw; ++j) {
                                int iw = ow * d.stride - d.pad + j;
                                if (iw < 0 || iw >= d.w) continue;
                                xc[ih * d.w + iw] += g * wk[i * d.kw + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(const double* x, const double* dy, double* dw, double* db,
                            const ConvDims& d) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < d.co; ++co) {
        double* wc = dw + static_cast<long>(co) * d.ci * d.kh * d.kw;
        double bacc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const double* gc = dy + (static_cast<long>(n) * d.co + co) * d.ho * d.wo;
            for (int oh = 0; oh < d.ho; ++oh) {
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = gc[oh * d.wo + ow];
                    if (g == 0.0) continue;
                    bacc += g;
                    for (int ci = 0; ci < d.ci; ++ci) {
                        const double* xc = x + (static_cast<long>(n) * d.ci + ci) * d.h * d.w;
                        double* wk = wc + static_cast<long>(ci) * d.kh * d.kw;
                        for (int i = 0; i < d.kh; ++i) {
                            int ih = oh * d.stride - d.pad + i;
                            if (ih < 0 || ih >= d.h) continue;
                            for (int j = 0; j < d.kw; ++j) {
                                int iw = ow * d.stride - d.pad + j;
                                if (iw < 0 || iw >= d.w) continue;
                                wk[i * d.kw + j] += g * xc[ih * d.w + iw];
                            }
                        }
                    }
                }
            }
        }
        if (db) db[co] += bacc;
    }
}

void dwconv2d_forward(const double* x, const double* w, const double* b, double* y,
                      const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.ci; ++c) {
            const double* xc = x + (static_cast<long>(n) * d.ci + c) * d.h * d.w;
            const double* wk = w + static_cast<long>(c) * d.kh * d.kw;
            double* yc = y + (static_cast<long>(n) * d.ci + c) * d.ho * d.wo;
            for (int oh = 0; oh < d.ho; ++oh) {
                for (int ow = 0; ow < d.wo; ++ow) {
                    double acc = b ? b[c] : 0.0;
                    for (int i = 0; i < d.kh; ++i) {
                        int ih = oh * d.stride - d.pad + i;
                        if (ih < 0 || ih >= d.h) continue;
                        for (int j = 0; j < d.kw; ++j) {
                            int iw = ow * d.stride - d.pad + j;
                            if (iw < 0 || iw >= d.w) continue;
                            acc += xc[ih * d.w + iw] * wk[i * d.kw + j];
                        }
                    }
                    yc[oh * d.wo + ow] = acc;
                }
            }
        }
    }
}

void dwconv2d_backward_input(const double* dy, const double* w, double* dx, const ConvDims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int c = 0; c < d.ci; ++c) {
            const double* gc = dy + (static_cast<long>(n) * d.ci + c) * d.ho * d.wo;
            const double* wk = w + static_cast<long>(c) * d.kh * d.kw;
            double* xc = dx + (static_cast<long>(n) * d.ci + c) * d.h * d.w;
            for (int oh = 0; oh < d.ho; ++oh) {
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = gc[oh * d.wo + ow];
                    if (g == 0.0) continue;
                    for (int i = 0; i < d.kh; ++i) {
                        int ih = oh * d.stride - d.pad + i;
                        if (ih < 0 || ih >= d.h) continue;
                        for (int j = 0; j < d.kw; ++j) {
                            int iw = ow * d.stride - d.pad + j;
                            if (iw < 0 || iw >= d.w) continue;
                            xc[ih * d.w + iw] += g * wk[i * d.kw + j];
                        }
                    }
                }
            }
        }
    }
}

void dwconv2d_backward_params(const double* x, const double* dy, double* dw, double* db,
                              const ConvDims& d) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < d.ci; ++c) {
        double* wk = dw + static_cast<long>(c) * d.kh * d.kw;
        double bacc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const double* xc = x + (static_cast<long>(n) * d.ci + c) * d.h * d.w;
            const double* gc = dy + (static_cast<long>(n) * d.ci + c) * d.ho * d.wo;
            for (int oh = 0; oh < d.ho; ++oh) {
                for (int ow = 0; ow < d.wo; ++ow) {
                    double g = gc[oh * d.wo + ow];
                    if (g == 0.0) continue;
                    bacc += g;
                    for (int i = 0; i < d.kh; ++i) {
                        int ih = oh * d.stride - d.pad + i;
                        if (ih < 0 || ih >= d.h) continue;
                        for (int j = 0; j < d.kw; ++j) {
                            int iw = ow * d.stride - d.pad + j;
                            if (iw < 0 || iw >= d.w) continue;
                            wk[i * d.kw + j] += g * xc[ih * d.w + iw];
                        }
                    }
                }
            }
        }
        if (db) db[c] += bacc;
    }
}

void linear_forward(const double* x, const double* w, const double* b, double* y,
                    int n, int ci, int co) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* xi = x + static_cast<long>(i) * ci;
        double* yi = y + static_cast<long>(i) * co;
        for (int o = 0; o < co; ++o) {
            const double* wo = w + static_cast<long>(o) * ci;
            double acc = b ? b[o] : 0.0;
            for (int c = 0; c < ci; ++c) acc += xi[c] * wo[c];
            yi[o] = acc;
        }
    }
}

void linear_backward_input(const double* dy, const double* w, double* dx, int n, int ci, int co) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* gi = dy + static_cast<long>(i) * co;
        double* xi = dx + static_cast<long>(i) * ci;
        for (int o = 0; o < co; ++o) {
            double g = gi[o];
            if (g == 0.0) continue;
            const double* wo = w + static_cast<long>(o) * ci;
            for (int c = 0; c < ci; ++c) xi[c] += g * wo[c];
        }
    }
}

void linear_backward_params(const double* x, const double* dy, double* dw, double* db,
                            int n, int ci, int co) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < co; ++o) {
        double* wo = dw + static_cast<long>(o) * ci;
        double bacc = 0.0;
        for (int i = 0; i < n; ++i) {
            double g = dy[static_cast<long>(i) * co + o];
            if (g == 0.0) continue;
            bacc += g;
            const double* xi = x + static_cast<long>(i) * ci;
            for (int c = 0; c < ci; ++c) wo[c] += g * xi[c];
        }
        if (db) db[o] += bacc;
    }
}

}  // namespace tp::kern
