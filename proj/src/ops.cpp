// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/ops.hpp"

#include <cmath>
#include <cstring>

#include "tp/kernels.hpp"

namespace tp::ops {

namespace {

bool wants_grad(const TensorPtr& t) { return t && t->requires_grad; }

TensorPtr make_output(std::vector<int> shape, bool track) {
    auto y = Tensor::zeros(std::move(shape));
    y->requires_grad = track;
    return y;
}

void check_4d(const char* op, const TensorPtr& x) {
    if (!x || x->rank() != 4) {
        throw ShapeError(std::string(op) + ": expected 4-d input, got " +
                         (x ? x->shape_str() : std::string("null")));
    }
}

ConvDims conv_dims(const char* op, const TensorPtr& x, int co, int kh, int kw, int stride,
                   int pad) {
    if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
    if (pad < 0) throw ShapeError(std::string(op) + ": pad must be >= 0");
    ConvDims d{};
    d.n = x->dim(0);
    d.ci = x->dim(1);
    d.h = x->dim(2);
    d.w = x->dim(3);
    d.co = co;
    d.kh = kh;
    d.kw = kw;
    d.stride = stride;
    d.pad = pad;
    int eh = d.h + 2 * pad - kh;
    int ew = d.w + 2 * pad - kw;
    if (eh < 0 || ew < 0) {
        throw ShapeError(std::string(op) + ": kernel " + std::to_string(kh) + "x" +
                         std::to_string(kw) + " larger than padded input " + x->shape_str());
    }
    d.ho = eh / stride + 1;
    d.wo = ew / stride + 1;
    return d;
}

}  // namespace

TensorPtr conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                 int stride, int pad) {
    check_4d("conv2d", x);
    if (!w || w->rank() != 4) throw ShapeError("conv2d: weight must be 4-d");
    if (w->dim(1) != x->dim(1)) {
        throw ShapeError("conv2d: weight expects " + std::to_string(w->dim(1)) +
                         " input channels, input has " + std::to_string(x->dim(1)));
    }
    if (b && (b->rank() != 1 || b->dim(0) != w->dim(0))) {
        throw ShapeError("conv2d: bias shape " + b->shape_str() + " does not match " +
                         std::to_string(w->dim(0)) + " filters");
    }
    ConvDims d = conv_dims("conv2d", x, w->dim(0), w->dim(2), w->dim(3), stride, pad);
    bool req = wants_grad(x) || wants_grad(w) || wants_grad(b);
    auto y = make_output({d.n, d.co, d.ho, d.wo}, req);
    kern::conv2d_forward(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                         y->data.data(), d);
    if (tape && req) {
        tape->record("conv2d", [x, w, b, y, d]() {
            if (x->requires_grad) {
                x->ensure_grad();
                kern::conv2d_backward_input(y->grad.data(), w->data.data(), x->grad.data(), d);
            }
            if (w->requires_grad || (b && b->requires_grad)) {
                w->ensure_grad();
                double* db = nullptr;
                if (b && b->requires_grad) {
                    b->ensure_grad();
                    db = b->grad.data();
                }
                kern::conv2d_backward_params(x->data.data(), y->grad.data(), w->grad.data(),
                                             db, d);
            }
        });
    }
    return y;
}

TensorPtr depthwise_conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& w,
                           const TensorPtr& b, int stride, int pad) {
    check_4d("depthwise_conv2d", x);
    if (!w || w->rank() != 3) throw ShapeError("depthwise_conv2d: weight must be [C,Kh,Kw]");
    if (w->dim(0) != x->dim(1)) {
        throw ShapeError("depthwise_conv2d: weight channels " + std::to_string(w->dim(0)) +
                         " != input channels " + std::to_string(x->dim(1)));
    }
    if (b && (b->rank() != 1 || b->dim(0) != w->dim(0))) {
        throw ShapeError("depthwise_conv2d: bias shape mismatch");
    }
    ConvDims d = conv_dims("depthwise_conv2d", x, x->dim(1), w->dim(1), w->dim(2), stride, pad);
    bool req = wants_grad(x) || wants_grad(w) || wants_grad(b);
    auto y = make_output({d.n, d.ci, d.ho, d.wo}, req);
    kern::dwconv2d_forward(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                           y->data.data(), d);
    if (tape && req) {
        tape->record("depthwise_conv2d", [x, w, b, y, d]() {
            if (x->requires_grad) {
                x->ensure_grad();
                kern::dwconv2d_backward_input(y->grad.data(), w->data.data(), x->grad.data(), d);
            }
            if (w->requires_grad || (b && b->requires_grad)) {
                w->ensure_grad();
                double* db = nullptr;
                if (b && b->requires_grad) {
                    b->ensure_grad();
                    db = b->grad.data();
                }
                kern::dwconv2d_backward_params(x->data.data(), y->grad.data(), w->grad.data(),
                                               db, d);
            }
        });
    }
    return y;
}

TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
    if (!x || x->rank() != 2) throw ShapeError("linear: expected 2-d input");
    if (!w || w->rank() != 2 || w->dim(1) != x->dim(1)) {
        throw ShapeError("linear: weight " + (w ? w->shape_str() : std::string("null")) +
                         " incompatible with input " + x->shape_str());
    }
    if (b && (b->rank() != 1 || b->dim(0) != w->dim(0))) {
        throw ShapeError("linear: bias shape mismatch");
    }
    int n = x->dim(0), ci = x->dim(1), co = w->dim(0);
    bool req = wants_grad(x) || wants_grad(w) || wants_grad(b);
    auto y = make_output({n, co}, req);
    kern::linear_forward(x->data.data(), w->data.data(), b ? b->data.data() : nullptr,
                         y->data.data(), n, ci, co);
    if (tape && req) {
        tape->record("linear", [x, w, b, y, n, ci, co]() {
            if (x->requires_grad) {
                x->ensure_grad();
                kern::linear_backward_input(y->grad.data(), w->data.data(), x->grad.data(), n,
                                            ci, co);
            }
            if (w->requires_grad || (b && b->requires_grad)) {
                w->ensure_grad();
                double* db = nullptr;
                if (b && b->requires_grad) {
                    b->ensure_grad();
                    db = b->grad.data();
                }
                kern::linear_backward_params(x->data.data(), y->grad.data(), w->grad.data(),
                                             db, n, ci, co);
            }
        });
    }
    return y;
}

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    if (!a || !b || a->shape != b->shape) {
        throw ShapeError("add: shape mismatch " + (a ? a->shape_str() : std::string("null")) +
                         " vs " + (b ? b->shape_str() : std::string("null")));
    }
    bool req = wants_grad(a) || wants_grad(b);
    auto y = make_output(a->shape, req);
    const std::size_t n = a->data.size();
    for (std::size_t i = 0; i < n; ++i) y->data[i] = a->data[i] + b->data[i];
    if (tape && req) {
        tape->record("add", [a, b, y]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += y->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += y->grad[i];
            }
        });
    }
    return y;
}

TensorPtr relu(Tape* tape, const TensorPtr& x) {
    bool req = wants_grad(x);
    auto y = make_output(x->shape, req);
    for (std::size_t i = 0; i < x->data.size(); ++i)
        y->data[i] = x->data[i] > 0.0 ? x->data[i] : 0.0;
    if (tape && req) {
        tape->record("relu", [x, y]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->grad.size(); ++i)
                if (x->data[i] > 0.0) x->grad[i] += y->grad[i];
        });
    }
    return y;
}

TensorPtr relu6(Tape* tape, const TensorPtr& x) {
    bool req = wants_grad(x);
    auto y = make_output(x->shape, req);
    for (std::size_t i = 0; i < x->data.size(); ++i) {
        double v = x->data[i];
        y->data[i] = v < 0.0 ? 0.0 : (v > 6.0 ? 6.0 : v);
    }
    if (tape && req) {
        tape->record("relu6", [x, y]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->grad.size(); ++i)
                if (x->data[i] > 0.0 && x->data[i] < 6.0) x->grad[i] += y->grad[i];
        });
    }
    return y;
}

TensorPtr scale(Tape* tape, const TensorPtr& x, const TensorPtr& alpha) {
    if (!alpha || alpha->numel() != 1) throw ShapeError("scale: alpha must be scalar");
    bool req = wants_grad(x) || wants_grad(alpha);
    auto y = make_output(x->shape, req);
    double a = alpha->data[0];
    for (std::size_t i = 0; i < x->data.size(); ++i) y->data[i] = a * x->data[i];
    if (tape && req) {
        tape->record("scale", [x, alpha, y, a]() {
            if (x->requires_grad) {
                x->ensure_grad();
                for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += a * y->grad[i];
            }
            if (alpha->requires_grad) {
                alpha->ensure_grad();
                double acc = 0.0;
                for (std::size_t i = 0; i < x->data.size(); ++i) acc += y->grad[i] * x->data[i];
                alpha->grad[0] += acc;
            }
        });
    }
    return y;
}

TensorPtr flatten(Tape* tape, const TensorPtr& x) {
    if (!x || x->rank() < 2) throw ShapeError("flatten: need rank >= 2");
    int n = x->dim(0);
    int rest = static_cast<int>(x->numel() / n);
    bool req = wants_grad(x);
    auto y = make_output({n, rest}, req);
    y->data = x->data;
    if (tape && req) {
        tape->record("flatten", [x, y]() {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += y->grad[i];
        });
    }
    return y;
}

TensorPtr concat_channels(Tape* tape, const std::vector<TensorPtr>& xs) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    const auto& first = xs.front();
    if (!first || first->rank() < 2) throw ShapeError("concat: need rank >= 2 inputs");
    int rank = first->rank();
    int total_c = 0;
    bool req = false;
    for (const auto& x : xs) {
        if (!x || x->rank() != rank) throw ShapeError("concat: rank mismatch");
        for (int a = 0; a < rank; ++a) {
            if (a != 1 && x->dim(a) != first->dim(a)) {
                throw ShapeError("concat: non-channel dims differ: " + x->shape_str() + " vs " +
                                 first->shape_str());
            }
        }
        total_c += x->dim(1);
        req = req || wants_grad(x);
    }
    std::vector<int> oshape = first->shape;
    oshape[1] = total_c;
    auto y = make_output(oshape, req);
    // inner = elements per channel, per batch row
    std::int64_t inner = 1;
    for (int a = 2; a < rank; ++a) inner *= first->dim(a);
    int n = first->dim(0);
    std::int64_t out_row = static_cast<std::int64_t>(total_c) * inner;
    std::int64_t coff = 0;
    for (const auto& x : xs) {
        std::int64_t xc = x->dim(1);
        std::int64_t in_row = xc * inner;
        for (int i = 0; i < n; ++i) {
            std::memcpy(y->data.data() + i * out_row + coff * inner,
                        x->data.data() + i * in_row,
                        static_cast<std::size_t>(in_row) * sizeof(double));
        }
        coff += xc;
    }
    if (tape && req) {
        tape->record("concat", [xs, y, n, inner, out_row]() {
            std::int64_t off = 0;
            for (const auto& x : xs) {
                std::int64_t xc = x->dim(1);
                std::int64_t in_row = xc * inner;
                if (x->requires_grad) {
                    x->ensure_grad();
                    for (int i = 0; i < n; ++i) {
                        const double* g = y->grad.data() + i * out_row + off * inner;
                        double* xg = x->grad.data() + i * in_row;
                        for (std::int64_t k = 0; k < in_row; ++k) xg[k] += g[k];
                    }
                }
                off += xc;
            }
        });
    }
    return y;
}

std::vector<TensorPtr> split_channels(Tape* tape, const TensorPtr& x,
                                      const std::vector<int>& sizes) {
    if (!x || x->rank() < 2) throw ShapeError("split: need rank >= 2 input");
    int total = 0;
    for (int s : sizes) {
        if (s <= 0) throw ShapeError("split: sizes must be positive");
        total += s;
    }
    if (total != x->dim(1)) {
        throw ShapeError("split: sizes sum " + std::to_string(total) + " != channels " +
                         std::to_string(x->dim(1)));
    }
    std::int64_t inner = 1;
    for (int a = 2; a < x->rank(); ++a) inner *= x->dim(a);
    int n = x->dim(0);
    std::int64_t in_row = static_cast<std::int64_t>(x->dim(1)) * inner;
    std::vector<TensorPtr> outs;
    std::int64_t off = 0;
    for (int s : sizes) {
        std::vector<int> oshape = x->shape;
        oshape[1] = s;
        auto y = make_output(oshape, wants_grad(x));
        std::int64_t orow = static_cast<std::int64_t>(s) * inner;
        for (int i = 0; i < n; ++i) {
            std::memcpy(y->data.data() + i * orow, x->data.data() + i * in_row + off * inner,
                        static_cast<std::size_t>(orow) * sizeof(double));
        }
        if (tape && wants_grad(x)) {
            std::int64_t off_c = off;
            tape->record("split", [x, y, n, inner, in_row, orow, off_c]() {
                x->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    const double* g = y->grad.data() + i * orow;
                    double* xg = x->grad.data() + i * in_row + off_c * inner;
                    for (std::int64_t k = 0; k < orow; ++k) xg[k] += g[k];
                }
            });
        }
        outs.push_back(std::move(y));
        off += s;
    }
    return outs;
}

TensorPtr batch_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gamma,
                     const TensorPtr& beta, const TensorPtr& run_mean,
                     const TensorPtr& run_var, bool training, double momentum, double eps) {
    if (!x || (x->rank() != 4 && x->rank() != 2)) {
        throw ShapeError("batch_norm: expected [N,C,H,W] or [N,C] input");
    }
    int c = x->dim(1);
    for (const auto& [t, name] : {std::pair{gamma, "gamma"}, {beta, "beta"},
                                  {run_mean, "run_mean"}, {run_var, "run_var"}}) {
        if (!t || t->rank() != 1 || t->dim(0) != c) {
            throw ShapeError(std::string("batch_norm: ") + name + " must be [C=" +
                             std::to_string(c) + "]");
        }
    }
    int n = x->dim(0);
    std::int64_t inner = 1;
    for (int a = 2; a < x->rank(); ++a) inner *= x->dim(a);
    std::int64_t m = static_cast<std::int64_t>(n) * inner;  // samples per channel
    std::int64_t crow = inner;
    std::int64_t nrow = static_cast<std::int64_t>(c) * inner;

    bool req = wants_grad(x) || wants_grad(gamma) || wants_grad(beta);
    auto y = make_output(x->shape, req);

    if (training) {
        auto mean = std::vector<double>(static_cast<std::size_t>(c));
        auto var = std::vector<double>(static_cast<std::size_t>(c));
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = x->data.data() + i * nrow + ch * crow;
                for (std::int64_t k = 0; k < inner; ++k) s += p[k];
            }
            double mu = s / static_cast<double>(m);
            double v = 0.0;
            for (int i = 0; i < n; ++i) {
                const double* p = x->data.data() + i * nrow + ch * crow;
                for (std::int64_t k = 0; k < inner; ++k) {
                    double dlt = p[k] - mu;
                    v += dlt * dlt;
                }
            }
            v /= static_cast<double>(m);  // biased, used for normalisation
            mean[static_cast<std::size_t>(ch)] = mu;
            var[static_cast<std::size_t>(ch)] = v;
            double inv = 1.0 / std::sqrt(v + eps);
            double g = gamma->data[static_cast<std::size_t>(ch)];
            double bt = beta->data[static_cast<std::size_t>(ch)];
            for (int i = 0; i < n; ++i) {
                const double* p = x->data.data() + i * nrow + ch * crow;
                double* q = y->data.data() + i * nrow + ch * crow;
                for (std::int64_t k = 0; k < inner; ++k) q[k] = g * (p[k] - mu) * inv + bt;
            }
            // running stats track the unbiased variance
            double uv = m > 1 ? v * static_cast<double>(m) / static_cast<double>(m - 1) : v;
            run_mean->data[static_cast<std::size_t>(ch)] =
                (1.0 - momentum) * run_mean->data[static_cast<std::size_t>(ch)] + momentum * mu;
            run_var->data[static_cast<std::size_t>(ch)] =
                (1.0 - momentum) * run_var->data[static_cast<std::size_t>(ch)] + momentum * uv;
        }
        if (tape && req) {
            auto mean_c = std::make_shared<std::vector<double>>(std::move(mean));
            auto var_c = std::make_shared<std::vector<double>>(std::move(var));
            tape->record("batch_norm", [x, gamma, beta, y, mean_c, var_c, n, c, inner, crow,
                                        nrow, m, eps]() {
                if (gamma->requires_grad) gamma->ensure_grad();
                if (beta->requires_grad) beta->ensure_grad();
                if (x->requires_grad) x->ensure_grad();
#pragma omp parallel for schedule(static)
                for (int ch = 0; ch < c; ++ch) {
                    double mu = (*mean_c)[static_cast<std::size_t>(ch)];
                    double inv = 1.0 / std::sqrt((*var_c)[static_cast<std::size_t>(ch)] + eps);
                    double g = gamma->data[static_cast<std::size_t>(ch)];
                    double sum_dy = 0.0, sum_dy_xhat = 0.0;
                    for (int i = 0; i < n; ++i) {
                        const double* px = x->data.data() + i * nrow + ch * crow;
                        const double* pg = y->grad.data() + i * nrow + ch * crow;
                        for (std::int64_t k = 0; k < inner; ++k) {
                            double xh = (px[k] - mu) * inv;
                            sum_dy += pg[k];
                            sum_dy_xhat += pg[k] * xh;
                        }
                    }
                    if (gamma->requires_grad) gamma->grad[static_cast<std::size_t>(ch)] += sum_dy_xhat;
                    if (beta->requires_grad) beta->grad[static_cast<std::size_t>(ch)] += sum_dy;
                    if (x->requires_grad) {
                        double im = 1.0 / static_cast<double>(m);
                        for (int i = 0; i < n; ++i) {
                            const double* px = x->data.data() + i * nrow + ch * crow;
                            const double* pg = y->grad.data() + i * nrow + ch * crow;
                            double* pd = x->grad.data() + i * nrow + ch * crow;
                            for (std::int64_t k = 0; k < inner; ++k) {
                                double xh = (px[k] - mu) * inv;
                                pd[k] += g * inv * (pg[k] - im * sum_dy - xh * im * sum_dy_xhat);
                            }
                        }
                    }
                }
            });
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int ch = 0; ch < c; ++ch) {
            double inv = 1.0 / std::sqrt(run_var->data[static_cast<std::size_t>(ch)] + eps);
            double g = gamma->data[static_cast<std::size_t>(ch)];
            double mu = run_mean->data[static_cast<std::size_t>(ch)];
            double bt = beta->data[static_cast<std::size_t>(ch)];
            for (int i = 0; i < n; ++i) {
                const double* p = x->data.data() + i * nrow + ch * crow;
                double* q = y->data.data() + i * nrow + ch * crow;
                for (std::int64_t k = 0; k < inner; ++k) q[k] = g * (p[k] - mu) * inv + bt;
            }
        }
        if (tape && req) {
            tape->record("batch_norm_eval", [x, gamma, beta, run_mean, run_var, y, n, c, inner,
                                             crow, nrow, eps]() {
                if (gamma->requires_grad) gamma->ensure_grad();
                if (beta->requires_grad) beta->ensure_grad();
                if (x->requires_grad) x->ensure_grad();
                for (int ch = 0; ch < c; ++ch) {
                    double inv = 1.0 / std::sqrt(run_var->data[static_cast<std::size_t>(ch)] + eps);
                    double g = gamma->data[static_cast<std::size_t>(ch)];
                    double mu = run_mean->data[static_cast<std::size_t>(ch)];
                    for (int i = 0; i < n; ++i) {
                        const double* px = x->data.data() + i * nrow + ch * crow;
                        const double* pg = y->grad.data() + i * nrow + ch * crow;
                        for (std::int64_t k = 0; k < inner; ++k) {
                            if (x->requires_grad)
                                x->grad[static_cast<std::size_t>(i * nrow + ch * crow + k)] +=
                                    g * inv * pg[k];
                            if (gamma->requires_grad)
                                gamma->grad[static_cast<std::size_t>(ch)] +=
                                    pg[k] * (px[k] - mu) * inv;
                            if (beta->requires_grad)
                                beta->grad[static_cast<std::size_t>(ch)] += pg[k];
                        }
                    }
                }
            });
        }
    }
    return y;
}

TensorPtr global_avg_pool(Tape* tape, const TensorPtr& x) {
    check_4d("global_avg_pool", x);
    int n = x->dim(0), c = x->dim(1);
    std::int64_t inner = static_cast<std::int64_t>(x->dim(2)) * x->dim(3);
    bool req = wants_grad(x);
    auto y = make_output({n, c}, req);
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
            const double* p = x->data.data() + (static_cast<std::int64_t>(i) * c + ch) * inner;
            double s = 0.0;
            for (std::int64_t k = 0; k < inner; ++k) s += p[k];
            y->data[static_cast<std::size_t>(i) * c + ch] = s / static_cast<double>(inner);
        }
    }
    if (tape && req) {
        tape->record("global_avg_pool", [x, y, n, c, inner]() {
            x->ensure_grad();
            double im = 1.0 / static_cast<double>(inner);
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    double g = y->grad[static_cast<std::size_t>(i) * c + ch] * im;
                    double* p = x->grad.data() + (static_cast<std::int64_t>(i) * c + ch) * inner;
                    for (std::int64_t k = 0; k < inner; ++k) p[k] += g;
                }
        });
    }
    return y;
}

std::vector<double> softmax_rows(const TensorPtr& logits) {
    if (!logits || logits->rank() != 2) throw ShapeError("softmax: expected [N,K] logits");
    int n = logits->dim(0), k = logits->dim(1);
    std::vector<double> p(static_cast<std::size_t>(n) * k);
    for (int i = 0; i < n; ++i) {
        const double* row = logits->data.data() + static_cast<std::int64_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        for (int j = 0; j < k; ++j)
            p[static_cast<std::size_t>(i) * k + j] = std::exp(row[j] - mx) / z;
    }
    return p;
}

TensorPtr softmax_cross_entropy(Tape* tape, const TensorPtr& logits,
                                const std::vector<int>& labels) {
    if (!logits || logits->rank() != 2) {
        throw ShapeError("softmax_cross_entropy: expected [N,K] logits");
    }
    int n = logits->dim(0), k = logits->dim(1);
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
    }
    for (int l : labels) {
        if (l < 0 || l >= k) {
            throw ShapeError("softmax_cross_entropy: label " + std::to_string(l) +
                             " outside [0," + std::to_string(k) + ")");
        }
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* row = logits->data.data() + static_cast<std::int64_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        total += mx + std::log(z) - row[labels[static_cast<std::size_t>(i)]];
    }
    bool req = wants_grad(logits);
    auto y = Tensor::scalar(total / n);
    y->requires_grad = req;
    if (tape && req) {
        auto labels_c = labels;
        tape->record("softmax_cross_entropy", [logits, y, labels_c, n, k]() {
            logits->ensure_grad();
            double g = y->grad[0] / n;
            auto p = softmax_rows(logits);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < k; ++j) {
                    double t = j == labels_c[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                    logits->grad[static_cast<std::size_t>(i) * k + j] +=
                        g * (p[static_cast<std::size_t>(i) * k + j] - t);
                }
            }
        });
    }
    return y;
}

void sgdm_step(const std::vector<TensorPtr>& params, std::vector<TensorPtr>& velocity,
               double lr, double momentum) {
    if (lr <= 0.0) throw Error("sgdm_step: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw Error("sgdm_step: momentum must be in [0,1)");
    if (params.size() != velocity.size()) {
        throw ShapeError("sgdm_step: " + std::to_string(params.size()) + " params vs " +
                         std::to_string(velocity.size()) + " velocity tensors");
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto& p = params[t];
        auto& v = velocity[t];
        if (!p || !v || p->shape != v->shape) {
            throw ShapeError("sgdm_step: velocity shape mismatch at tensor " + std::to_string(t));
        }
        if (!p->has_grad()) throw Error("sgdm_step: missing gradient at tensor " + std::to_string(t));
        for (std::size_t i = 0; i < p->data.size(); ++i) {
            v->data[i] = momentum * v->data[i] + p->grad[i];
            p->data[i] -= lr * v->data[i];
        }
    }
}

}  // namespace tp::ops
