// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/groups.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

namespace tp {

namespace {

class UnionFind {
public:
    explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)) {
        for (int i = 0; i < n; ++i) parent_[static_cast<std::size_t>(i)] = i;
    }
    int find(int a) {
        while (parent_[static_cast<std::size_t>(a)] != a) {
            parent_[static_cast<std::size_t>(a)] =
                parent_[static_cast<std::size_t>(parent_[static_cast<std::size_t>(a)])];
            a = parent_[static_cast<std::size_t>(a)];
        }
        return a;
    }
    int unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return a;
        if (b < a) std::swap(a, b);  // keep the smaller id as root for determinism
        parent_[static_cast<std::size_t>(b)] = a;
        return a;
    }

private:
    std::vector<int> parent_;
};

struct SlotTable {
    std::vector<int> base;   // per node; -1 when the node owns no slots
    std::vector<int> owner;  // per slot: node index
    std::vector<int> chan;   // per slot: channel
    int total = 0;
};

bool is_passthrough(LayerKind k) {
    return k == LayerKind::BatchNorm || k == LayerKind::ReLU || k == LayerKind::ReLU6 ||
           k == LayerKind::GlobalAvgPool;
}

}  // namespace

std::vector<PruneGroup> resolve_prune_groups(const NetworkGraph& graph) {
    graph.validate();
    auto ch = graph.channels();
    std::unordered_map<std::string, int> idx;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i)
        idx[graph.nodes[i].id] = static_cast<int>(i);

    SlotTable slots;
    slots.base.assign(graph.nodes.size(), -1);
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& nd = graph.nodes[i];
        if (nd.kind == LayerKind::Conv || nd.kind == LayerKind::DepthwiseConv) {
            slots.base[i] = slots.total;
            for (int c = 0; c < ch[i]; ++c) {
                slots.owner.push_back(static_cast<int>(i));
                slots.chan.push_back(c);
            }
            slots.total += ch[i];
        }
    }

    UnionFind uf(slots.total);
    std::vector<char> tied_to_input(static_cast<std::size_t>(slots.total), 0);

    // origins[i][c]: slot producing channel c of node i, or -1 for image data
    std::vector<std::vector<int>> origins(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& nd = graph.nodes[i];
        auto& org = origins[i];
        switch (nd.kind) {
            case LayerKind::Input:
                org.assign(static_cast<std::size_t>(ch[i]), -1);
                break;
            case LayerKind::Conv:
                org.resize(static_cast<std::size_t>(ch[i]));
                for (int c = 0; c < ch[i]; ++c) org[static_cast<std::size_t>(c)] = slots.base[i] + c;
                break;
            case LayerKind::DepthwiseConv: {
                const auto& in = origins[static_cast<std::size_t>(idx.at(nd.inputs[0]))];
                org.resize(static_cast<std::size_t>(ch[i]));
                for (int c = 0; c < ch[i]; ++c) {
                    int own = slots.base[i] + c;
                    int parent = in[static_cast<std::size_t>(c)];
                    if (parent < 0) {
                        tied_to_input[static_cast<std::size_t>(uf.find(own))] = 1;
                        org[static_cast<std::size_t>(c)] = own;
                    } else {
                        org[static_cast<std::size_t>(c)] = uf.unite(own, parent);
                    }
                }
                break;
            }
            case LayerKind::Add: {
                const auto& first = origins[static_cast<std::size_t>(idx.at(nd.inputs[0]))];
                org = first;
                for (std::size_t k = 1; k < nd.inputs.size(); ++k) {
                    const auto& other = origins[static_cast<std::size_t>(idx.at(nd.inputs[k]))];
                    if (other.size() != org.size()) {
                        throw Error("prune groups: add '" + nd.id + "' joins branches of " +
                                    std::to_string(org.size()) + " and " +
                                    std::to_string(other.size()) + " channels");
                    }
                    for (std::size_t c = 0; c < org.size(); ++c) {
                        int a = org[c], b = other[c];
                        if (a < 0 && b < 0) continue;
                        if (a < 0 || b < 0) {
                            int s = a < 0 ? b : a;
                            int r = uf.find(s);
                            tied_to_input[static_cast<std::size_t>(r)] = 1;
                            org[c] = s;
                        } else {
                            org[c] = uf.unite(a, b);
                        }
                    }
                }
                break;
            }
            case LayerKind::Concat: {
                for (const auto& in_id : nd.inputs) {
                    const auto& in = origins[static_cast<std::size_t>(idx.at(in_id))];
                    org.insert(org.end(), in.begin(), in.end());
                }
                break;
            }
            case LayerKind::FullyConnected:
                // fc outputs are fresh, non-prunable channels
                org.assign(static_cast<std::size_t>(ch[i]), -1);
                break;
            default:  // pass-through kinds
                org = origins[static_cast<std::size_t>(idx.at(nd.inputs[0]))];
                break;
        }
        if (static_cast<int>(org.size()) != ch[i]) {
            throw Error("prune groups: channel bookkeeping failed at '" + nd.id + "'");
        }
    }

    // second pass after all unions: bn attachments and consumer slices
    std::vector<std::vector<FilterRef>> bn_of(static_cast<std::size_t>(slots.total));
    std::vector<std::vector<FilterRef>> consumers_of(static_cast<std::size_t>(slots.total));
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& nd = graph.nodes[i];
        if (nd.kind == LayerKind::BatchNorm) {
            const auto& in = origins[static_cast<std::size_t>(idx.at(nd.inputs[0]))];
            for (std::size_t c = 0; c < in.size(); ++c) {
                if (in[c] >= 0)
                    bn_of[static_cast<std::size_t>(uf.find(in[c]))].push_back(
                        {nd.id, static_cast<int>(c)});
            }
        } else if (nd.kind == LayerKind::Conv || nd.kind == LayerKind::FullyConnected) {
            const auto& in = origins[static_cast<std::size_t>(idx.at(nd.inputs[0]))];
            for (std::size_t c = 0; c < in.size(); ++c) {
                if (in[c] >= 0)
                    consumers_of[static_cast<std::size_t>(uf.find(in[c]))].push_back(
                        {nd.id, static_cast<int>(c)});
            }
        }
    }

    // collect classes
    std::vector<std::vector<int>> class_slots(static_cast<std::size_t>(slots.total));
    for (int s = 0; s < slots.total; ++s)
        class_slots[static_cast<std::size_t>(uf.find(s))].push_back(s);

    std::vector<PruneGroup> groups;
    for (int root = 0; root < slots.total; ++root) {
        const auto& members = class_slots[static_cast<std::size_t>(root)];
        if (members.empty()) continue;
        if (tied_to_input[static_cast<std::size_t>(root)]) {
            throw Error("prune groups: channels of '" +
                        graph.nodes[static_cast<std::size_t>(slots.owner[static_cast<std::size_t>(
                            members.front())])].id +
                        "' are structurally tied to input channels; unsupported coupling");
        }
        PruneGroup g;
        for (int s : members) {
            int ni = slots.owner[static_cast<std::size_t>(s)];
            g.members.push_back({graph.nodes[static_cast<std::size_t>(ni)].id,
                                 slots.chan[static_cast<std::size_t>(s)]});
            if (graph.nodes[static_cast<std::size_t>(ni)].kind == LayerKind::Conv)
                ++g.primary_filters;
        }
        std::sort(g.members.begin(), g.members.end(), [&](const FilterRef& a, const FilterRef& b) {
            int ia = idx.at(a.node), ib = idx.at(b.node);
            return ia != ib ? ia < ib : a.channel < b.channel;
        });
        g.bn_params = bn_of[static_cast<std::size_t>(root)];
        g.consumers = consumers_of[static_cast<std::size_t>(root)];
        g.layer_index = idx.at(g.members.front().node);
        g.channel_index = g.members.front().channel;
        g.origin_width = ch[static_cast<std::size_t>(g.layer_index)];
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(), [](const PruneGroup& a, const PruneGroup& b) {
        return a.layer_index != b.layer_index ? a.layer_index < b.layer_index
                                              : a.channel_index < b.channel_index;
    });
    for (std::size_t i = 0; i < groups.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "g%05zu", i);
        groups[i].id = buf;
    }
    return groups;
}

NetworkGraph remove_groups(const NetworkGraph& graph, const std::vector<PruneGroup>& groups) {
    auto ch = graph.channels();
    std::unordered_map<std::string, int> idx;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i)
        idx[graph.nodes[i].id] = static_cast<int>(i);

    // per-node keep mask for channel-owning nodes
    std::vector<std::vector<char>> keep(graph.nodes.size());
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& nd = graph.nodes[i];
        if (nd.kind == LayerKind::Conv || nd.kind == LayerKind::DepthwiseConv)
            keep[i].assign(static_cast<std::size_t>(ch[i]), 1);
    }
    for (const auto& g : groups) {
        for (const auto& m : g.members) {
            auto it = idx.find(m.node);
            if (it == idx.end()) throw Error("remove_groups: unknown node '" + m.node + "'");
            auto& mask = keep[static_cast<std::size_t>(it->second)];
            if (mask.empty() || m.channel < 0 || m.channel >= static_cast<int>(mask.size())) {
                throw Error("remove_groups: group '" + g.id + "' does not match graph at '" +
                            m.node + "' channel " + std::to_string(m.channel));
            }
            mask[static_cast<std::size_t>(m.channel)] = 0;
        }
    }

    auto count_kept = [](const std::vector<char>& m) {
        int n = 0;
        for (char v : m) n += v;
        return n;
    };

    // derive output masks through the graph and rebuild weights
    std::vector<std::vector<char>> out_mask(graph.nodes.size());
    NetworkGraph g2;
    g2.family = graph.family;
    g2.input_h = graph.input_h;
    g2.input_w = graph.input_w;
    g2.input_c = graph.input_c;
    g2.embedding_node = graph.embedding_node;
    g2.head_node = graph.head_node;

    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& nd = graph.nodes[i];
        LayerNode out = nd;  // copies id/kind/attrs/inputs; tensors replaced below
        auto in_mask = [&](std::size_t k) -> const std::vector<char>& {
            return out_mask[static_cast<std::size_t>(idx.at(nd.inputs[k]))];
        };
        switch (nd.kind) {
            case LayerKind::Input:
                out_mask[i].assign(static_cast<std::size_t>(graph.input_c), 1);
                break;
            case LayerKind::Conv: {
                const auto& rows = keep[i];
                const auto& cols = in_mask(0);
                int co = count_kept(rows);
                if (co == 0) {
                    throw Error("remove_groups: removal would empty layer '" + nd.id + "'");
                }
                int ci = count_kept(cols);
                auto w = Tensor::zeros({co, ci, nd.kernel_h, nd.kernel_w});
                w->requires_grad = true;
                std::int64_t kk = static_cast<std::int64_t>(nd.kernel_h) * nd.kernel_w;
                std::int64_t dst = 0;
                for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
                    if (!rows[static_cast<std::size_t>(r)]) continue;
                    for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
                        if (!cols[static_cast<std::size_t>(c)]) continue;
                        const double* src =
                            nd.weight->data.data() +
                            (static_cast<std::int64_t>(r) * cols.size() + c) * kk;
                        std::copy(src, src + kk, w->data.begin() + dst);
                        dst += kk;
                    }
                }
                out.weight = w;
                if (nd.bias) {
                    auto bvec = Tensor::zeros({co});
                    bvec->requires_grad = true;
                    int d = 0;
                    for (int r = 0; r < static_cast<int>(rows.size()); ++r)
                        if (rows[static_cast<std::size_t>(r)])
                            bvec->data[static_cast<std::size_t>(d++)] =
                                nd.bias->data[static_cast<std::size_t>(r)];
                    out.bias = bvec;
                }
                out_mask[i] = rows;
                break;
            }
            case LayerKind::DepthwiseConv: {
                const auto& parent = in_mask(0);
                const auto& own = keep[i];
                if (own != parent) {
                    throw Error("remove_groups: depthwise '" + nd.id +
                                "' channels out of sync with parent; groups must couple them");
                }
                int c2 = count_kept(own);
                if (c2 == 0)
                    throw Error("remove_groups: removal would empty layer '" + nd.id + "'");
                std::int64_t kk = static_cast<std::int64_t>(nd.kernel_h) * nd.kernel_w;
                auto w = Tensor::zeros({c2, nd.kernel_h, nd.kernel_w});
                w->requires_grad = true;
                std::int64_t dst = 0;
                for (int c = 0; c < static_cast<int>(own.size()); ++c) {
                    if (!own[static_cast<std::size_t>(c)]) continue;
                    const double* src = nd.weight->data.data() + static_cast<std::int64_t>(c) * kk;
                    std::copy(src, src + kk, w->data.begin() + dst);
                    dst += kk;
                }
                out.weight = w;
                if (nd.bias) {
                    auto bvec = Tensor::zeros({c2});
                    bvec->requires_grad = true;
                    int d = 0;
                    for (int c = 0; c < static_cast<int>(own.size()); ++c)
                        if (own[static_cast<std::size_t>(c)])
                            bvec->data[static_cast<std::size_t>(d++)] =
                                nd.bias->data[static_cast<std::size_t>(c)];
                    out.bias = bvec;
                }
                out_mask[i] = own;
                break;
            }
            case LayerKind::BatchNorm: {
                const auto& mask = in_mask(0);
                int c2 = count_kept(mask);
                auto filt = [&](const TensorPtr& t, bool learn) {
                    auto r = Tensor::zeros({c2});
                    r->requires_grad = learn;
                    int d = 0;
                    for (int c = 0; c < static_cast<int>(mask.size()); ++c)
                        if (mask[static_cast<std::size_t>(c)])
                            r->data[static_cast<std::size_t>(d++)] =
                                t->data[static_cast<std::size_t>(c)];
                    return r;
                };
                out.gamma = filt(nd.gamma, true);
                out.beta = filt(nd.beta, true);
                out.run_mean = filt(nd.run_mean, false);
                out.run_var = filt(nd.run_var, false);
                out_mask[i] = mask;
                break;
            }
            case LayerKind::Add: {
                const auto& m0 = in_mask(0);
                for (std::size_t k = 1; k < nd.inputs.size(); ++k) {
                    if (in_mask(k) != m0) {
                        throw Error("remove_groups: add '" + nd.id +
                                    "' branches disagree after removal; groups must span them");
                    }
                }
                out_mask[i] = m0;
                break;
            }
            case LayerKind::Concat: {
                auto& m = out_mask[i];
                for (std::size_t k = 0; k < nd.inputs.size(); ++k) {
                    const auto& mk = in_mask(k);
                    m.insert(m.end(), mk.begin(), mk.end());
                }
                break;
            }
            case LayerKind::FullyConnected: {
                const auto& cols = in_mask(0);
                int ci = count_kept(cols);
                int co = nd.weight->dim(0);
                auto w = Tensor::zeros({co, ci});
                w->requires_grad = true;
                std::int64_t dst = 0;
                for (int r = 0; r < co; ++r) {
                    for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
                        if (!cols[static_cast<std::size_t>(c)]) continue;
                        w->data[static_cast<std::size_t>(dst++)] =
                            nd.weight->data[static_cast<std::size_t>(
                                static_cast<std::int64_t>(r) * cols.size() + c)];
                    }
                }
                out.weight = w;
                out.bias = nd.bias ? nd.bias->clone() : nullptr;
                out_mask[i].assign(static_cast<std::size_t>(co), 1);
                break;
            }
            default:
                out_mask[i] = in_mask(0);
                break;
        }
        g2.nodes.push_back(std::move(out));
    }
    g2.validate();
    return g2;
}

NetworkGraph remove_groups_by_id(const NetworkGraph& graph,
                                 const std::vector<PruneGroup>& all_groups,
                                 const std::vector<std::string>& ids) {
    std::vector<PruneGroup> chosen;
    for (const auto& id : ids) {
        auto it = std::find_if(all_groups.begin(), all_groups.end(),
                               [&](const PruneGroup& g) { return g.id == id; });
        if (it == all_groups.end()) throw Error("remove_groups: unknown group id '" + id + "'");
        chosen.push_back(*it);
    }
    return remove_groups(graph, chosen);
}

namespace {

// applies fn(value, grad) over every learnable scalar of the group
template <typename Fn>
void for_group_params(const NetworkGraph& graph, const PruneGroup& group, bool need_grad, Fn fn) {
    for (const auto& m : group.members) {
        const auto& nd = graph.node(m.node);
        if (!nd.weight) throw Error("group params: node '" + m.node + "' has no weights");
        std::int64_t row = nd.weight->numel() / nd.weight->dim(0);
        if (m.channel < 0 || m.channel >= nd.weight->dim(0))
            throw Error("group params: channel out of range at '" + m.node + "'");
        if (need_grad && !nd.weight->has_grad())
            throw Error("group params: missing gradients at '" + m.node + "'");
        std::int64_t off = static_cast<std::int64_t>(m.channel) * row;
        for (std::int64_t k = 0; k < row; ++k) {
            fn(nd.weight->data[static_cast<std::size_t>(off + k)],
               need_grad ? nd.weight->grad[static_cast<std::size_t>(off + k)] : 0.0,
               &nd.weight->data[static_cast<std::size_t>(off + k)]);
        }
        if (nd.bias) {
            if (need_grad && !nd.bias->has_grad())
                throw Error("group params: missing gradients at '" + m.node + "' bias");
            fn(nd.bias->data[static_cast<std::size_t>(m.channel)],
               need_grad ? nd.bias->grad[static_cast<std::size_t>(m.channel)] : 0.0,
               &nd.bias->data[static_cast<std::size_t>(m.channel)]);
        }
    }
    for (const auto& b : group.bn_params) {
        const auto& nd = graph.node(b.node);
        for (const auto& t : {nd.gamma, nd.beta}) {
            if (need_grad && !t->has_grad())
                throw Error("group params: missing gradients at '" + b.node + "'");
            fn(t->data[static_cast<std::size_t>(b.channel)],
               need_grad ? t->grad[static_cast<std::size_t>(b.channel)] : 0.0,
               &t->data[static_cast<std::size_t>(b.channel)]);
        }
    }
}

}  // namespace

std::vector<double> group_scores(const NetworkGraph& graph,
                                 const std::vector<PruneGroup>& groups) {
    std::vector<double> scores;
    scores.reserve(groups.size());
    for (const auto& g : groups) {
        double s = 0.0;
        for_group_params(graph, g, /*need_grad=*/true,
                         [&](double w, double grad, double*) {
                             double t = grad * w;
                             s += t * t;
                         });
        scores.push_back(s);
    }
    return scores;
}

std::int64_t group_param_count(const NetworkGraph& graph, const PruneGroup& group) {
    std::int64_t n = 0;
    for_group_params(graph, group, /*need_grad=*/false,
                     [&](double, double, double*) { ++n; });
    return n;
}

void zero_group_params(NetworkGraph& graph, const PruneGroup& group) {
    for_group_params(graph, group, /*need_grad=*/false,
                     [&](double, double, double* p) { *p = 0.0; });
}

}  // namespace tp
