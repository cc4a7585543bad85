// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace tp {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Input: return "input";
        case LayerKind::Conv: return "conv";
        case LayerKind::DepthwiseConv: return "depthwise_conv";
        case LayerKind::BatchNorm: return "batch_norm";
        case LayerKind::ReLU: return "relu";
        case LayerKind::ReLU6: return "relu6";
        case LayerKind::Add: return "add";
        case LayerKind::Concat: return "concat";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
        case LayerKind::FullyConnected: return "fully_connected";
    }
    return "unknown";
}

int NetworkGraph::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id == id) return static_cast<int>(i);
    return -1;
}

const LayerNode& NetworkGraph::node(const std::string& id) const {
    int i = index_of(id);
    if (i < 0) throw Error("graph: unknown node id '" + id + "'");
    return nodes[static_cast<std::size_t>(i)];
}

LayerNode& NetworkGraph::node(const std::string& id) {
    int i = index_of(id);
    if (i < 0) throw Error("graph: unknown node id '" + id + "'");
    return nodes[static_cast<std::size_t>(i)];
}

std::vector<int> NetworkGraph::channels() const {
    std::vector<int> ch(nodes.size(), 0);
    std::unordered_map<std::string, int> idx;
    for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i].id] = static_cast<int>(i);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        auto in_ch = [&](std::size_t k) {
            auto it = idx.find(nd.inputs[k]);
            if (it == idx.end() || it->second >= static_cast<int>(i)) {
                throw Error("graph: node '" + nd.id + "' input '" + nd.inputs[k] +
                            "' missing or not topologically earlier");
            }
            return ch[static_cast<std::size_t>(it->second)];
        };
        switch (nd.kind) {
            case LayerKind::Input:
                ch[i] = input_c;
                break;
            case LayerKind::Conv:
            case LayerKind::FullyConnected:
                ch[i] = nd.weight ? nd.weight->dim(0) : 0;
                break;
            case LayerKind::DepthwiseConv:
                ch[i] = in_ch(0);
                break;
            case LayerKind::Concat: {
                int total = 0;
                for (std::size_t k = 0; k < nd.inputs.size(); ++k) total += in_ch(k);
                ch[i] = total;
                break;
            }
            default:
                ch[i] = in_ch(0);
                break;
        }
    }
    return ch;
}

void NetworkGraph::validate() const {
    if (nodes.empty()) throw Error("graph: empty");
    if (input_h <= 0 || input_w <= 0 || input_c <= 0) {
        throw Error("graph: invalid input spec");
    }
    std::unordered_set<std::string> seen;
    int input_count = 0;
    for (const auto& nd : nodes) {
        if (nd.id.empty()) throw Error("graph: empty node id");
        if (!seen.insert(nd.id).second) throw Error("graph: duplicate node id '" + nd.id + "'");
        if (nd.kind == LayerKind::Input) {
            ++input_count;
            if (!nd.inputs.empty()) throw Error("graph: input node with predecessors");
        } else if (nd.inputs.empty()) {
            throw Error("graph: node '" + nd.id + "' has no predecessor");
        }
    }
    if (input_count != 1) throw Error("graph: expected exactly one input node");

    auto ch = channels();  // also verifies topological order
    std::unordered_map<std::string, int> idx;
    for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i].id] = static_cast<int>(i);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        auto in_ch = [&](std::size_t k) { return ch[static_cast<std::size_t>(idx.at(nd.inputs[k]))]; };
        switch (nd.kind) {
            case LayerKind::Conv:
                if (!nd.weight || nd.weight->rank() != 4)
                    throw Error("graph: conv '" + nd.id + "' missing 4-d weight");
                if (nd.weight->dim(1) != in_ch(0))
                    throw Error("graph: conv '" + nd.id + "' expects " +
                                std::to_string(nd.weight->dim(1)) + " input channels, gets " +
                                std::to_string(in_ch(0)));
                break;
            case LayerKind::DepthwiseConv:
                if (!nd.weight || nd.weight->rank() != 3 || nd.weight->dim(0) != in_ch(0))
                    throw Error("graph: depthwise conv '" + nd.id + "' weight mismatch");
                break;
            case LayerKind::FullyConnected:
                if (!nd.weight || nd.weight->rank() != 2 || nd.weight->dim(1) != in_ch(0))
                    throw Error("graph: fc '" + nd.id + "' weight mismatch");
                break;
            case LayerKind::BatchNorm:
                for (const auto& t : {nd.gamma, nd.beta, nd.run_mean, nd.run_var}) {
                    if (!t || t->rank() != 1 || t->dim(0) != in_ch(0))
                        throw Error("graph: batch_norm '" + nd.id + "' param mismatch");
                }
                break;
            case LayerKind::Add: {
                if (nd.inputs.size() < 2) throw Error("graph: add '" + nd.id + "' needs >=2 inputs");
                for (std::size_t k = 1; k < nd.inputs.size(); ++k)
                    if (in_ch(k) != in_ch(0))
                        throw Error("graph: add '" + nd.id + "' channel mismatch");
                break;
            }
            case LayerKind::Concat:
                if (nd.inputs.size() < 2)
                    throw Error("graph: concat '" + nd.id + "' needs >=2 inputs");
                break;
            default:
                break;
        }
    }
    if (!embedding_node.empty() && node(embedding_node).kind != LayerKind::GlobalAvgPool)
        throw Error("graph: embedding node must be a global_avg_pool");
    if (!head_node.empty() && node(head_node).kind != LayerKind::FullyConnected)
        throw Error("graph: head node must be fully connected");
}

std::vector<TensorPtr> NetworkGraph::parameters() const {
    std::vector<TensorPtr> ps;
    for (const auto& nd : nodes) {
        if (nd.kind == LayerKind::BatchNorm) {
            ps.push_back(nd.gamma);
            ps.push_back(nd.beta);
        } else if (nd.weight) {
            ps.push_back(nd.weight);
            if (nd.bias) ps.push_back(nd.bias);
        }
    }
    return ps;
}

std::int64_t NetworkGraph::count_learnables() const {
    std::int64_t n = 0;
    for (const auto& p : parameters()) n += p->numel();
    return n;
}

int NetworkGraph::embedding_size() const {
    if (embedding_node.empty()) throw Error("graph: no embedding node designated");
    auto ch = channels();
    return ch[static_cast<std::size_t>(index_of(embedding_node))];
}

int NetworkGraph::conv_depth() const {
    std::unordered_map<std::string, int> idx;
    for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i].id] = static_cast<int>(i);
    std::vector<int> depth(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& nd = nodes[i];
        int d = 0;
        for (const auto& in : nd.inputs)
            d = std::max(d, depth[static_cast<std::size_t>(idx.at(in))]);
        bool counted = (nd.kind == LayerKind::Conv || nd.kind == LayerKind::DepthwiseConv ||
                        nd.kind == LayerKind::FullyConnected) &&
                       !nd.aux_head;
        depth[i] = d + (counted ? 1 : 0);
        best = std::max(best, depth[i]);
    }
    return best;
}

std::int64_t NetworkGraph::max_prunable_filters() const {
    std::int64_t total = 0;
    for (const auto& nd : nodes) {
        if (nd.kind != LayerKind::Conv) continue;
        std::int64_t f = nd.weight->dim(0);
        total += (4 * f + 4) / 5;  // ceil(0.8 * f)
    }
    return total;
}

std::int64_t NetworkGraph::live_filters() const {
    std::int64_t total = 0;
    for (const auto& nd : nodes)
        if (nd.kind == LayerKind::Conv) total += nd.weight->dim(0);
    return total;
}

NetworkGraph NetworkGraph::clone() const {
    NetworkGraph g = *this;
    for (auto& nd : g.nodes) {
        for (TensorPtr* t : {&nd.weight, &nd.bias, &nd.gamma, &nd.beta, &nd.run_mean, &nd.run_var}) {
            if (*t) *t = (*t)->clone();
        }
    }
    return g;
}

void NetworkGraph::copy_state_from(const NetworkGraph& other) {
    if (other.nodes.size() != nodes.size()) throw Error("copy_state_from: structure mismatch");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        auto& a = nodes[i];
        const auto& b = other.nodes[i];
        if (a.id != b.id || a.kind != b.kind) throw Error("copy_state_from: structure mismatch");
        auto cp = [](const TensorPtr& dst, const TensorPtr& src) {
            if (static_cast<bool>(dst) != static_cast<bool>(src))
                throw Error("copy_state_from: tensor presence mismatch");
            if (dst) {
                if (dst->shape != src->shape) throw Error("copy_state_from: shape mismatch");
                dst->data = src->data;
            }
        };
        cp(a.weight, b.weight);
        cp(a.bias, b.bias);
        cp(a.gamma, b.gamma);
        cp(a.beta, b.beta);
        cp(a.run_mean, b.run_mean);
        cp(a.run_var, b.run_var);
    }
}

ForwardResult forward(const NetworkGraph& graph, const TensorPtr& batch, bool training,
                      Tape* tape) {
    if (!batch || batch->rank() != 4) throw ShapeError("forward: expected [N,C,H,W] batch");
    if (batch->dim(1) != graph.input_c || batch->dim(2) != graph.input_h ||
        batch->dim(3) != graph.input_w) {
        throw ShapeError("forward: batch " + batch->shape_str() + " does not match input spec [" +
                         std::to_string(graph.input_c) + "," + std::to_string(graph.input_h) +
                         "," + std::to_string(graph.input_w) + "]");
    }
    std::unordered_map<std::string, int> idx;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) idx[graph.nodes[i].id] = static_cast<int>(i);

    ForwardResult out;
    out.activations.resize(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& nd = graph.nodes[i];
        auto in = [&](std::size_t k) -> const TensorPtr& {
            return out.activations[static_cast<std::size_t>(idx.at(nd.inputs[k]))];
        };
        TensorPtr y;
        switch (nd.kind) {
            case LayerKind::Input:
                y = batch;
                break;
            case LayerKind::Conv:
                y = ops::conv2d(tape, in(0), nd.weight, nd.bias, nd.stride, nd.pad);
                break;
            case LayerKind::DepthwiseConv:
                y = ops::depthwise_conv2d(tape, in(0), nd.weight, nd.bias, nd.stride, nd.pad);
                break;
            case LayerKind::BatchNorm:
                y = ops::batch_norm(tape, in(0), nd.gamma, nd.beta, nd.run_mean, nd.run_var,
                                    training, nd.bn_momentum, nd.bn_eps);
                break;
            case LayerKind::ReLU:
                y = ops::relu(tape, in(0));
                break;
            case LayerKind::ReLU6:
                y = ops::relu6(tape, in(0));
                break;
            case LayerKind::Add: {
                y = ops::add(tape, in(0), in(1));
                for (std::size_t k = 2; k < nd.inputs.size(); ++k) y = ops::add(tape, y, in(k));
                break;
            }
            case LayerKind::Concat: {
                std::vector<TensorPtr> xs;
                for (std::size_t k = 0; k < nd.inputs.size(); ++k) xs.push_back(in(k));
                y = ops::concat_channels(tape, xs);
                break;
            }
            case LayerKind::GlobalAvgPool:
                y = ops::global_avg_pool(tape, in(0));
                break;
            case LayerKind::FullyConnected:
                y = ops::linear(tape, in(0), nd.weight, nd.bias);
                break;
        }
        out.activations[i] = y;
    }
    if (!graph.head_node.empty())
        out.logits = out.activations[static_cast<std::size_t>(graph.index_of(graph.head_node))];
    if (!graph.embedding_node.empty())
        out.embedding =
            out.activations[static_cast<std::size_t>(graph.index_of(graph.embedding_node))];
    return out;
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'P', 'N', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    std::vector<std::uint8_t> bytes;
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t b;
        std::memcpy(&b, &v, 8);
        u64(b);
    }
    void f32(float v) {
        std::uint32_t b;
        std::memcpy(&b, &v, 4);
        u32(b);
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes.insert(bytes.end(), s.begin(), s.end());
    }
    void tensor(const TensorPtr& t) {
        if (!t) {
            u32(0xffffffffu);
            return;
        }
        u32(static_cast<std::uint32_t>(t->rank()));
        for (int e : t->shape) u32(static_cast<std::uint32_t>(e));
        for (double v : t->data) f32(static_cast<float>(v));
    }
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
    std::size_t pos = 0;
    std::uint8_t u8() {
        need(1);
        return bytes_[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        auto b = u64();
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    float f32() {
        auto b = u32();
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    std::string str() {
        auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos), n);
        pos += n;
        return s;
    }
    TensorPtr tensor(bool requires_grad) {
        auto rank = u32();
        if (rank == 0xffffffffu) return nullptr;
        if (rank > 8) throw IoError("model file: implausible tensor rank");
        std::vector<int> shape;
        for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<int>(u32()));
        auto n = shape_numel(shape);
        std::vector<double> data(static_cast<std::size_t>(n));
        for (auto& v : data) v = static_cast<double>(f32());
        auto t = Tensor::from(std::move(shape), std::move(data));
        t->requires_grad = requires_grad;
        return t;
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    void need(std::size_t n) {
        if (pos + n > bytes_.size()) throw IoError("model file: truncated");
    }
};

}  // namespace

std::vector<std::uint8_t> serialize(const NetworkGraph& graph, std::uint64_t config_hash) {
    Writer w;
    w.bytes.insert(w.bytes.end(), kMagic, kMagic + 4);
    w.u32(kVersion);
    w.u64(config_hash);
    w.str(graph.family);
    w.u32(static_cast<std::uint32_t>(graph.input_h));
    w.u32(static_cast<std::uint32_t>(graph.input_w));
    w.u32(static_cast<std::uint32_t>(graph.input_c));
    w.str(graph.embedding_node);
    w.str(graph.head_node);
    w.u32(static_cast<std::uint32_t>(graph.nodes.size()));
    for (const auto& nd : graph.nodes) {
        w.str(nd.id);
        w.u8(static_cast<std::uint8_t>(nd.kind));
        w.u8(nd.aux_head ? 1 : 0);
        w.u32(static_cast<std::uint32_t>(nd.inputs.size()));
        for (const auto& in : nd.inputs) w.str(in);
        w.u32(static_cast<std::uint32_t>(nd.kernel_h));
        w.u32(static_cast<std::uint32_t>(nd.kernel_w));
        w.u32(static_cast<std::uint32_t>(nd.stride));
        w.u32(static_cast<std::uint32_t>(nd.pad));
        w.f64(nd.bn_momentum);
        w.f64(nd.bn_eps);
        w.tensor(nd.weight);
        w.tensor(nd.bias);
        w.tensor(nd.gamma);
        w.tensor(nd.beta);
        w.tensor(nd.run_mean);
        w.tensor(nd.run_var);
    }
    std::uint64_t checksum = fnv1a_bytes(w.bytes.data(), w.bytes.size(), 14695981039346656037ULL);
    w.u64(checksum);
    return std::move(w.bytes);
}

NetworkGraph deserialize(const std::vector<std::uint8_t>& bytes, std::uint64_t* config_hash) {
    if (bytes.size() < 16) throw IoError("model file: truncated header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError("model file: bad magic");
    // verify the trailing checksum before trusting any payload
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + static_cast<std::size_t>(i)])
                  << (8 * i);
    std::uint64_t actual =
        fnv1a_bytes(bytes.data(), bytes.size() - 8, 14695981039346656037ULL);
    if (stored != actual) throw IoError("model file: checksum failure");

    Reader r(bytes);
    r.pos = 4;
    std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw IoError("model file: version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kVersion) + ")");
    }
    std::uint64_t hash = r.u64();
    if (config_hash) *config_hash = hash;

    NetworkGraph g;
    g.family = r.str();
    g.input_h = static_cast<int>(r.u32());
    g.input_w = static_cast<int>(r.u32());
    g.input_c = static_cast<int>(r.u32());
    g.embedding_node = r.str();
    g.head_node = r.str();
    auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        LayerNode nd;
        nd.id = r.str();
        nd.kind = static_cast<LayerKind>(r.u8());
        nd.aux_head = r.u8() != 0;
        auto nin = r.u32();
        for (std::uint32_t k = 0; k < nin; ++k) nd.inputs.push_back(r.str());
        nd.kernel_h = static_cast<int>(r.u32());
        nd.kernel_w = static_cast<int>(r.u32());
        nd.stride = static_cast<int>(r.u32());
        nd.pad = static_cast<int>(r.u32());
        nd.bn_momentum = r.f64();
        nd.bn_eps = r.f64();
        bool learnable = true;
        nd.weight = r.tensor(learnable);
        nd.bias = r.tensor(learnable);
        nd.gamma = r.tensor(learnable);
        nd.beta = r.tensor(learnable);
        nd.run_mean = r.tensor(false);
        nd.run_var = r.tensor(false);
        g.nodes.push_back(std::move(nd));
    }
    g.validate();
    return g;
}

void save_model(const std::filesystem::path& path, const NetworkGraph& graph,
                std::uint64_t config_hash) {
    auto bytes = serialize(graph, config_hash);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: '" + path.string() + "'");
}

NetworkGraph load_model(const std::filesystem::path& path, std::uint64_t* config_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("model file missing: '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes, config_hash);
}

}  // namespace tp
