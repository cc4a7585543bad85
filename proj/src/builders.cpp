// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/builders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tp/config.hpp"

namespace tp {

namespace {

// Weights are drawn at float32 precision so a freshly initialised graph
// round-trips bit-identically through the 32-bit model format.
double fdraw(Rng& rng, double sigma) {
    return static_cast<double>(static_cast<float>(rng.normal(0.0, sigma)));
}

TensorPtr init_conv_weight(Rng& rng, int co, int ci, int kh, int kw) {
    double sigma = std::sqrt(2.0 / (static_cast<double>(ci) * kh * kw));
    auto w = Tensor::zeros({co, ci, kh, kw});
    for (auto& v : w->data) v = fdraw(rng, sigma);
    w->requires_grad = true;
    return w;
}

TensorPtr init_dw_weight(Rng& rng, int c, int kh, int kw) {
    double sigma = std::sqrt(2.0 / (static_cast<double>(kh) * kw));
    auto w = Tensor::zeros({c, kh, kw});
    for (auto& v : w->data) v = fdraw(rng, sigma);
    w->requires_grad = true;
    return w;
}

TensorPtr init_fc_weight(Rng& rng, int co, int ci) {
    double sigma = std::sqrt(1.0 / static_cast<double>(ci));
    auto w = Tensor::zeros({co, ci});
    for (auto& v : w->data) v = fdraw(rng, sigma);
    w->requires_grad = true;
    return w;
}

TensorPtr learnable(TensorPtr t) {
    t->requires_grad = true;
    return t;
}

class GraphBuilder {
public:
    GraphBuilder(NetworkGraph& g, Rng& rng) : g_(g), rng_(rng) {}

    std::string input() {
        LayerNode nd;
        nd.id = "input";
        nd.kind = LayerKind::Input;
        g_.nodes.push_back(std::move(nd));
        return "input";
    }

    std::string conv(const std::string& id, const std::string& in, int co, int ci, int k,
                     int stride, int pad) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::Conv;
        nd.inputs = {in};
        nd.kernel_h = nd.kernel_w = k;
        nd.stride = stride;
        nd.pad = pad;
        nd.weight = init_conv_weight(rng_, co, ci, k, k);
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string dwconv(const std::string& id, const std::string& in, int c, int k, int stride,
                       int pad) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::DepthwiseConv;
        nd.inputs = {in};
        nd.kernel_h = nd.kernel_w = k;
        nd.stride = stride;
        nd.pad = pad;
        nd.weight = init_dw_weight(rng_, c, k, k);
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string bn(const std::string& id, const std::string& in, int c) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::BatchNorm;
        nd.inputs = {in};
        nd.gamma = learnable(Tensor::full({c}, 1.0));
        nd.beta = learnable(Tensor::zeros({c}));
        nd.run_mean = Tensor::zeros({c});
        nd.run_var = Tensor::full({c}, 1.0);
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string act(const std::string& id, const std::string& in, bool clipped) {
        LayerNode nd;
        nd.id = id;
        nd.kind = clipped ? LayerKind::ReLU6 : LayerKind::ReLU;
        nd.inputs = {in};
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string add(const std::string& id, const std::vector<std::string>& ins) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::Add;
        nd.inputs = ins;
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string concat(const std::string& id, const std::vector<std::string>& ins) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::Concat;
        nd.inputs = ins;
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string gap(const std::string& id, const std::string& in) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::GlobalAvgPool;
        nd.inputs = {in};
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    std::string fc(const std::string& id, const std::string& in, int co, int ci, bool aux) {
        LayerNode nd;
        nd.id = id;
        nd.kind = LayerKind::FullyConnected;
        nd.inputs = {in};
        nd.aux_head = aux;
        nd.weight = init_fc_weight(rng_, co, ci);
        nd.bias = learnable(Tensor::zeros({co}));
        g_.nodes.push_back(std::move(nd));
        return id;
    }

    /// conv -> bn -> activation, returns the activation id.
    std::string cba(const std::string& base, const std::string& in, int co, int ci, int k,
                    int stride, int pad, bool clipped = false) {
        auto c = conv(base, in, co, ci, k, stride, pad);
        auto b = bn(base + "_bn", c, co);
        return act(base + "_act", b, clipped);
    }

private:
    NetworkGraph& g_;
    Rng& rng_;
};

NetworkGraph build_fire_net(const ScaleConfig& cfg, Rng& rng) {
    NetworkGraph g;
    g.family = cfg.family;
    g.input_h = cfg.input_h;
    g.input_w = cfg.input_w;
    g.input_c = cfg.input_c;
    GraphBuilder b(g, rng);

    auto x = b.input();
    x = b.cba("conv1", x, cfg.stem, cfg.input_c, 3, cfg.first_stride, 1);
    int ch = cfg.stem;
    for (std::size_t i = 0; i < cfg.fire_squeeze.size(); ++i) {
        std::string base = "fire" + std::to_string(i + 1);
        int s = cfg.fire_squeeze[i];
        int e = cfg.fire_expand[i];
        bool down = std::find(cfg.fire_downsample.begin(), cfg.fire_downsample.end(),
                              static_cast<int>(i)) != cfg.fire_downsample.end();
        auto sq = b.cba(base + "_squeeze", x, s, ch, 1, down ? 2 : 1, 0);
        auto e1 = b.cba(base + "_expand1x1", sq, e, s, 1, 1, 0);
        auto e3 = b.cba(base + "_expand3x3", sq, e, s, 3, 1, 1);
        x = b.concat(base + "_concat", {e1, e3});
        ch = 2 * e;
    }
    x = b.cba("conv_embed", x, cfg.fire_embed, ch, 1, 1, 0);
    auto emb = b.gap("embedding", x);
    // canonical form of this family ends in a conv classifier, so the
    // appended fc head is auxiliary for depth accounting
    b.fc("head", emb, cfg.class_count, cfg.fire_embed, /*aux=*/true);
    g.embedding_node = "embedding";
    g.head_node = "head";
    return g;
}

NetworkGraph build_invres_net(const ScaleConfig& cfg, Rng& rng) {
    NetworkGraph g;
    g.family = cfg.family;
    g.input_h = cfg.input_h;
    g.input_w = cfg.input_w;
    g.input_c = cfg.input_c;
    GraphBuilder b(g, rng);

    auto x = b.input();
    x = b.cba("conv1", x, cfg.stem, cfg.input_c, 3, cfg.first_stride, 1, /*clipped=*/true);
    int ch = cfg.stem;
    int bi = 0;
    for (const auto& grp : cfg.invres_groups) {
        for (int k = 0; k < grp.blocks; ++k, ++bi) {
            std::string base = "block" + std::to_string(bi + 1);
            int stride = k == 0 ? grp.stride : 1;
            int mid = grp.expand_ratio * ch;
            std::string y = x;
            // ReLU6 after the first two convolutions only; the projection is linear
            if (grp.expand_ratio != 1) y = b.cba(base + "_expand", y, mid, ch, 1, 1, 0, true);
            y = b.dwconv(base + "_dw", y, mid, 3, stride, 1);
            y = b.bn(base + "_dw_bn", y, mid);
            y = b.act(base + "_dw_act", y, true);
            y = b.conv(base + "_project", y, grp.channels, mid, 1, 1, 0);
            y = b.bn(base + "_project_bn", y, grp.channels);
            if (stride == 1 && ch == grp.channels) {
                y = b.add(base + "_add", {x, y});
            }
            x = y;
            ch = grp.channels;
        }
    }
    x = b.cba("conv_last", x, cfg.invres_embed, ch, 1, 1, 0, /*clipped=*/true);
    auto emb = b.gap("embedding", x);
    b.fc("head", emb, cfg.class_count, cfg.invres_embed, /*aux=*/false);
    g.embedding_node = "embedding";
    g.head_node = "head";
    return g;
}

NetworkGraph build_bottleneck_net(const ScaleConfig& cfg, Rng& rng) {
    NetworkGraph g;
    g.family = cfg.family;
    g.input_h = cfg.input_h;
    g.input_w = cfg.input_w;
    g.input_c = cfg.input_c;
    GraphBuilder b(g, rng);

    auto x = b.input();
    x = b.cba("conv1", x, cfg.stem, cfg.input_c, 7, cfg.first_stride, 3);
    int ch = cfg.stem;
    int si = 0;
    for (const auto& st : cfg.stages) {
        ++si;
        int out = 4 * st.reduce;
        for (int k = 0; k < st.blocks; ++k) {
            std::string base = "stage" + std::to_string(si) + "_block" + std::to_string(k + 1);
            int stride = k == 0 ? st.stride : 1;
            auto y = b.cba(base + "_reduce", x, st.reduce, ch, 1, 1, 0);
            y = b.cba(base + "_conv3x3", y, st.reduce, st.reduce, 3, stride, 1);
            y = b.conv(base + "_restore", y, out, st.reduce, 1, 1, 0);
            y = b.bn(base + "_restore_bn", y, out);
            std::string skip = x;
            if (k == 0) {
                skip = b.conv(base + "_proj", x, out, ch, 1, stride, 0);
                skip = b.bn(base + "_proj_bn", skip, out);
            }
            auto sum = b.add(base + "_add", {skip, y});
            x = b.act(base + "_out", sum, false);
            ch = out;
        }
    }
    auto emb = b.gap("embedding", x);
    b.fc("head", emb, cfg.class_count, ch, /*aux=*/false);
    g.embedding_node = "embedding";
    g.head_node = "head";
    return g;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    return out;
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::vector<int>> parse_tuple_list(const std::string& s, std::size_t arity,
                                               const char* what) {
    std::vector<std::vector<int>> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::vector<int> tup;
        std::stringstream ts(item);
        std::string part;
        while (std::getline(ts, part, ':')) tup.push_back(std::stoi(part));
        if (tup.size() != arity) {
            throw ConfigError(std::string(what) + ": expected " + std::to_string(arity) +
                              " colon-separated fields, got '" + item + "'");
        }
        out.push_back(std::move(tup));
    }
    return out;
}

}  // namespace

void ScaleConfig::validate() const {
    if (family != "fire-net" && family != "inverted-residual-net" &&
        family != "bottleneck-net") {
        throw ConfigError("arch: unknown family '" + family + "'");
    }
    if (input_h <= 0 || input_w <= 0 || input_c <= 0)
        throw ConfigError("arch: input dimensions must be positive");
    if (class_count < 2) throw ConfigError("arch: class_count must be >= 2");
    if (stem <= 0) throw ConfigError("arch: stem width must be positive");
    if (first_stride < 1) throw ConfigError("arch: first_stride must be >= 1");
    if (family == "fire-net") {
        if (fire_squeeze.empty() || fire_squeeze.size() != fire_expand.size())
            throw ConfigError("arch: fire-net needs matching squeeze/expand width lists");
        for (int v : fire_squeeze)
            if (v <= 0) throw ConfigError("arch: zero squeeze width");
        for (int v : fire_expand)
            if (v <= 0) throw ConfigError("arch: zero expand width");
        if (fire_embed <= 0) throw ConfigError("arch: embed width must be positive");
    } else if (family == "inverted-residual-net") {
        if (invres_groups.empty()) throw ConfigError("arch: no block groups");
        for (const auto& grp : invres_groups) {
            if (grp.expand_ratio < 1 || grp.channels <= 0 || grp.blocks <= 0 || grp.stride < 1)
                throw ConfigError("arch: invalid block group");
        }
        if (invres_embed <= 0) throw ConfigError("arch: embed width must be positive");
    } else {
        if (stages.empty()) throw ConfigError("arch: no stages");
        for (const auto& st : stages) {
            if (st.reduce <= 0 || st.blocks <= 0 || st.stride < 1)
                throw ConfigError("arch: invalid stage");
        }
    }
}

ScaleConfig ScaleConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ScaleConfig cfg;
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    auto geti = [&](const char* key, int dflt) {
        auto* v = get(key);
        return v ? std::stoi(*v) : dflt;
    };
    if (auto* v = get("family")) cfg.family = *v;
    else throw ConfigError("arch: missing 'family'");
    cfg.input_h = geti("input_h", geti("input_size", 24));
    cfg.input_w = geti("input_w", geti("input_size", 24));
    cfg.input_c = geti("input_channels", 1);
    cfg.class_count = geti("class_count", 2);
    cfg.stem = geti("stem", 8);
    cfg.first_stride = geti("first_stride", 1);
    if (cfg.family == "fire-net") {
        if (auto* v = get("squeeze")) cfg.fire_squeeze = parse_int_list(*v);
        if (auto* v = get("expand")) cfg.fire_expand = parse_int_list(*v);
        if (auto* v = get("downsample")) cfg.fire_downsample = parse_int_list(*v);
        cfg.fire_embed = geti("embed", 16);
    } else if (cfg.family == "inverted-residual-net") {
        if (auto* v = get("blocks")) {
            for (const auto& t : parse_tuple_list(*v, 4, "arch blocks (t:c:n:s)")) {
                cfg.invres_groups.push_back({t[0], t[1], t[2], t[3]});
            }
        }
        cfg.invres_embed = geti("embed", 32);
    } else if (cfg.family == "bottleneck-net") {
        if (auto* v = get("stages")) {
            for (const auto& t : parse_tuple_list(*v, 3, "arch stages (reduce:blocks:stride)")) {
                cfg.stages.push_back({t[0], t[1], t[2]});
            }
        }
    }
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> ScaleConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["family"] = family;
    kv["input_h"] = std::to_string(input_h);
    kv["input_w"] = std::to_string(input_w);
    kv["input_channels"] = std::to_string(input_c);
    kv["class_count"] = std::to_string(class_count);
    kv["stem"] = std::to_string(stem);
    kv["first_stride"] = std::to_string(first_stride);
    if (family == "fire-net") {
        kv["squeeze"] = join_ints(fire_squeeze);
        kv["expand"] = join_ints(fire_expand);
        kv["downsample"] = join_ints(fire_downsample);
        kv["embed"] = std::to_string(fire_embed);
    } else if (family == "inverted-residual-net") {
        std::string s;
        for (std::size_t i = 0; i < invres_groups.size(); ++i) {
            const auto& g = invres_groups[i];
            if (i) s += ",";
            s += std::to_string(g.expand_ratio) + ":" + std::to_string(g.channels) + ":" +
                 std::to_string(g.blocks) + ":" + std::to_string(g.stride);
        }
        kv["blocks"] = s;
        kv["embed"] = std::to_string(invres_embed);
    } else {
        std::string s;
        for (std::size_t i = 0; i < stages.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(stages[i].reduce) + ":" + std::to_string(stages[i].blocks) +
                 ":" + std::to_string(stages[i].stride);
        }
        kv["stages"] = s;
    }
    return kv;
}

ScaleConfig ScaleConfig::from_file(const std::filesystem::path& path) {
    auto sections = parse_kv_file(path);
    // accept either a bare key-value file or one with an [arch] section
    auto it = sections.find("arch");
    const auto& kv = it != sections.end() ? it->second : sections[""];
    return from_kv(kv);
}

NetworkGraph build_architecture(const ScaleConfig& cfg, Rng& rng) {
    cfg.validate();
    NetworkGraph g;
    if (cfg.family == "fire-net") {
        g = build_fire_net(cfg, rng);
    } else if (cfg.family == "inverted-residual-net") {
        g = build_invres_net(cfg, rng);
    } else {
        g = build_bottleneck_net(cfg, rng);
    }
    g.validate();
    return g;
}

ScaleConfig paper_scale_config(const std::string& family) {
    ScaleConfig cfg;
    cfg.family = family;
    cfg.input_h = cfg.input_w = 113;
    cfg.input_c = 3;
    cfg.first_stride = 1;  // 113x113 inputs keep the first conv at stride 1
    if (family == "fire-net") {
        cfg.class_count = 2;
        cfg.stem = 64;
        cfg.fire_squeeze = {16, 16, 32, 32, 48, 48, 64, 64};
        cfg.fire_expand = {64, 64, 128, 128, 192, 192, 256, 256};
        cfg.fire_downsample = {0, 2, 4};
        cfg.fire_embed = 1000;
    } else if (family == "inverted-residual-net") {
        cfg.class_count = 1000;
        cfg.stem = 32;
        cfg.invres_groups = {{1, 16, 1, 1},  {6, 24, 2, 2}, {6, 32, 3, 2}, {6, 64, 4, 2},
                             {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
        cfg.invres_embed = 1280;
    } else if (family == "bottleneck-net") {
        cfg.class_count = 2;
        cfg.stem = 64;
        cfg.stages = {{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}};
    } else {
        throw ConfigError("paper_scale_config: unknown family '" + family + "'");
    }
    return cfg;
}

}  // namespace tp
