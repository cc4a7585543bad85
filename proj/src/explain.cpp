// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tp/verify.hpp"

namespace tp {

void LimeConfig::validate() const {
    if (grid_rows < 1 || grid_cols < 1) throw ConfigError("explain: grid must be positive");
    if (samples < grid_rows * grid_cols)
        throw ConfigError("explain: samples must be >= grid cell count");
}

namespace {

void normalize_map(Heatmap& m) {
    double lo = m.values.front(), hi = m.values.front();
    for (double v : m.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo <= 0.0) {
        std::fill(m.values.begin(), m.values.end(), 0.0);
        return;
    }
    for (auto& v : m.values) v = (v - lo) / (hi - lo);
}

std::vector<double> embedding_of(const NetworkGraph& graph, const TensorPtr& image) {
    auto out = forward(graph, batch_images({image}), /*training=*/false, nullptr);
    return out.embedding->data;
}

TensorPtr apply_mask(const TensorPtr& image, const std::vector<char>& mask, int rows, int cols,
                     double fill) {
    int c = image->dim(0), h = image->dim(1), w = image->dim(2);
    auto out = image->clone();
    for (int r = 0; r < rows; ++r) {
        int y0 = static_cast<int>(static_cast<std::int64_t>(r) * h / rows);
        int y1 = static_cast<int>(static_cast<std::int64_t>(r + 1) * h / rows);
        for (int cc = 0; cc < cols; ++cc) {
            if (mask[static_cast<std::size_t>(r) * cols + cc]) continue;
            int x0 = static_cast<int>(static_cast<std::int64_t>(cc) * w / cols);
            int x1 = static_cast<int>(static_cast<std::int64_t>(cc + 1) * w / cols);
            for (int ch = 0; ch < c; ++ch)
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x)
                        out->data[(static_cast<std::size_t>(ch) * h + y) * w + x] = fill;
        }
    }
    return out;
}

double safe_cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;  // degenerate embedding: no response
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_normal_equations(std::vector<double>& a, std::vector<double>& rhs, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(a[static_cast<std::size_t>(r) * n + col]) >
                std::fabs(a[static_cast<std::size_t>(piv) * n + col]))
                piv = r;
        double p = a[static_cast<std::size_t>(piv) * n + col];
        if (std::fabs(p) < 1e-10) return false;
        if (piv != col) {
            for (int k = 0; k < n; ++k)
                std::swap(a[static_cast<std::size_t>(col) * n + k],
                          a[static_cast<std::size_t>(piv) * n + k]);
            std::swap(rhs[static_cast<std::size_t>(col)], rhs[static_cast<std::size_t>(piv)]);
        }
        for (int r = col + 1; r < n; ++r) {
            double f = a[static_cast<std::size_t>(r) * n + col] / p;
            if (f == 0.0) continue;
            for (int k = col; k < n; ++k)
                a[static_cast<std::size_t>(r) * n + k] -=
                    f * a[static_cast<std::size_t>(col) * n + k];
            rhs[static_cast<std::size_t>(r)] -= f * rhs[static_cast<std::size_t>(col)];
        }
    }
    for (int col = n - 1; col >= 0; --col) {
        double v = rhs[static_cast<std::size_t>(col)];
        for (int k = col + 1; k < n; ++k)
            v -= a[static_cast<std::size_t>(col) * n + k] * rhs[static_cast<std::size_t>(k)];
        rhs[static_cast<std::size_t>(col)] = v / a[static_cast<std::size_t>(col) * n + col];
    }
    return true;
}

}  // namespace

std::vector<double> fit_mask_surrogate(const std::vector<std::vector<char>>& masks,
                                       std::span<const double> responses, bool* fallback) {
    if (masks.size() != responses.size() || masks.empty())
        throw Error("fit_mask_surrogate: masks and responses must align");
    int cells = static_cast<int>(masks.front().size());
    int n = cells + 1;  // intercept in column 0
    std::vector<double> ata(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> atr(static_cast<std::size_t>(n), 0.0);
    auto bit = [&](const std::vector<char>& m, int j) {
        return j == 0 ? 1.0 : static_cast<double>(m[static_cast<std::size_t>(j - 1)]);
    };
    for (std::size_t s = 0; s < masks.size(); ++s) {
        for (int i = 0; i < n; ++i) {
            double xi = bit(masks[s], i);
            if (xi == 0.0) continue;
            atr[static_cast<std::size_t>(i)] += xi * responses[s];
            for (int j = 0; j < n; ++j)
                ata[static_cast<std::size_t>(i) * n + j] += xi * bit(masks[s], j);
        }
    }
    auto rhs = atr;
    auto a = ata;
    if (solve_normal_equations(a, rhs, n)) {
        if (fallback) *fallback = false;
        return rhs;
    }
    // singular design: per-cell single-occlusion deltas against the mean
    // all-on response (the closest available stand-in)
    if (fallback) *fallback = true;
    std::vector<double> coeffs(static_cast<std::size_t>(n), 0.0);
    // estimate per-cell effect as mean(response | cell on) - mean(response | cell off)
    for (int cidx = 0; cidx < cells; ++cidx) {
        double on = 0.0, off = 0.0;
        std::int64_t non = 0, noff = 0;
        for (std::size_t s = 0; s < masks.size(); ++s) {
            if (masks[s][static_cast<std::size_t>(cidx)]) {
                on += responses[s];
                ++non;
            } else {
                off += responses[s];
                ++noff;
            }
        }
        if (non > 0 && noff > 0) coeffs[static_cast<std::size_t>(cidx + 1)] = on / non - off / noff;
    }
    return coeffs;
}

Heatmap lime_heatmap(const NetworkGraph& graph, const TensorPtr& image, const LimeConfig& cfg) {
    cfg.validate();
    if (!image || image->rank() != 3 || image->dim(1) != graph.input_h ||
        image->dim(2) != graph.input_w || image->dim(0) != graph.input_c) {
        throw ShapeError("lime_heatmap: image does not match graph input spec");
    }
    int cells = cfg.grid_rows * cfg.grid_cols;
    auto reference = embedding_of(graph, image);

    Rng rng(cfg.seed);
    std::vector<std::vector<char>> masks;
    std::vector<double> responses;
    masks.reserve(static_cast<std::size_t>(cfg.samples));
    for (int s = 0; s < cfg.samples; ++s) {
        std::vector<char> m(static_cast<std::size_t>(cells));
        for (auto& b : m) b = rng.uniform() < 0.5 ? 1 : 0;
        masks.push_back(std::move(m));
    }
    responses.resize(masks.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t s = 0; s < masks.size(); ++s) {
        auto masked = apply_mask(image, masks[s], cfg.grid_rows, cfg.grid_cols, cfg.fill);
        auto emb = embedding_of(graph, masked);
        responses[s] = safe_cosine(emb, reference);
    }

    Heatmap map;
    map.rows = cfg.grid_rows;
    map.cols = cfg.grid_cols;
    bool fallback = false;
    auto coeffs = fit_mask_surrogate(masks, responses, &fallback);
    map.used_fallback = fallback;
    map.values.assign(coeffs.begin() + 1, coeffs.end());
    normalize_map(map);
    return map;
}

Heatmap average_heatmap(std::span<const Heatmap> maps) {
    if (maps.empty()) throw Error("average_heatmap: no maps");
    Heatmap out;
    out.rows = maps.front().rows;
    out.cols = maps.front().cols;
    out.values.assign(maps.front().values.size(), 0.0);
    for (const auto& m : maps) {
        if (m.rows != out.rows || m.cols != out.cols)
            throw ShapeError("average_heatmap: resolution mismatch");
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += m.values[i];
    }
    for (auto& v : out.values) v /= static_cast<double>(maps.size());
    normalize_map(out);
    return out;
}

double heatmap_psnr(const Heatmap& a, const Heatmap& b) {
    if (a.rows != b.rows || a.cols != b.cols || a.values.size() != b.values.size())
        throw ShapeError("heatmap_psnr: resolution mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.values.size());
    if (mse == 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

PsnrHistogram psnr_histogram(const NetworkGraph& a, const NetworkGraph& b, const Dataset& ds,
                             std::span<const int> indices, const LimeConfig& cfg,
                             int resize_short, int bins) {
    if (indices.empty()) throw Error("psnr_histogram: no images");
    if (bins < 1) throw ConfigError("psnr_histogram: bins must be positive");
    if (a.input_h != b.input_h || a.input_w != b.input_w || a.input_c != b.input_c)
        throw ShapeError("psnr_histogram: networks take different input sizes");
    PsnrHistogram out;
    out.bins = bins;
    out.values.resize(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        LimeConfig per = cfg;
        per.seed = derive_seed(cfg.seed, "image", static_cast<std::uint64_t>(indices[k]));
        auto img = eval_preprocess(ds.samples[static_cast<std::size_t>(indices[k])].image,
                                   resize_short, a.input_h);
        auto ma = lime_heatmap(a, img, per);
        auto mb = lime_heatmap(b, img, per);
        out.values[k] = heatmap_psnr(ma, mb);
    }
    out.counts.assign(static_cast<std::size_t>(bins), 0);
    double width = (out.hi - out.lo) / bins;
    for (double v : out.values) {
        int bin = static_cast<int>((v - out.lo) / width);
        bin = std::clamp(bin, 0, bins - 1);
        ++out.counts[static_cast<std::size_t>(bin)];
    }
    return out;
}

void save_heatmap_pgm(const std::filesystem::path& path, const Heatmap& map) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << "P5\n" << map.cols << " " << map.rows << "\n255\n";
    for (double v : map.values) {
        unsigned char byte =
            static_cast<unsigned char>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
        f.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!f) throw IoError("write failed: '" + path.string() + "'");
}

}  // namespace tp
