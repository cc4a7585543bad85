// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <set>

#include "doctest.h"
#include "testutil.hpp"
#include "tp/builders.hpp"
#include "tp/groups.hpp"

using namespace tp;

namespace {

ScaleConfig toy_fire() {
    ScaleConfig cfg;
    cfg.family = "fire-net";
    cfg.input_h = cfg.input_w = 10;
    cfg.input_c = 1;
    cfg.class_count = 3;
    cfg.stem = 4;
    cfg.fire_squeeze = {2, 3};
    cfg.fire_expand = {4, 5};
    cfg.fire_downsample = {1};
    cfg.fire_embed = 6;
    return cfg;
}

ScaleConfig toy_invres() {
    ScaleConfig cfg;
    cfg.family = "inverted-residual-net";
    cfg.input_h = cfg.input_w = 10;
    cfg.input_c = 1;
    cfg.class_count = 3;
    cfg.stem = 4;
    cfg.invres_groups = {{3, 4, 2, 1}, {3, 6, 2, 2}};
    cfg.invres_embed = 8;
    return cfg;
}

ScaleConfig toy_bottleneck() {
    ScaleConfig cfg;
    cfg.family = "bottleneck-net";
    cfg.input_h = cfg.input_w = 10;
    cfg.input_c = 1;
    cfg.class_count = 3;
    cfg.stem = 4;
    cfg.stages = {{2, 3, 1}, {3, 2, 2}};  // three chained blocks share skips in stage 1
    return cfg;
}

// Per-node channel survival/taint bookkeeping, derived only from the removed
// group's member list and the graph topology: "present" channels survive the
// removal; a present channel is "tainted" when its value may legitimately
// change because a weighted consumer lost one of its inputs.
struct ChannelOracle {
    std::vector<std::vector<char>> present, tainted;

    ChannelOracle(const NetworkGraph& g, const PruneGroup& removed) {
        auto ch = g.channels();
        std::map<std::string, int> idx;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) idx[g.nodes[i].id] = static_cast<int>(i);
        std::map<std::string, std::set<int>> gone;
        for (const auto& m : removed.members) gone[m.node].insert(m.channel);
        present.resize(g.nodes.size());
        tainted.resize(g.nodes.size());
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const auto& nd = g.nodes[i];
            auto in = [&](std::size_t k) -> std::size_t {
                return static_cast<std::size_t>(idx.at(nd.inputs[k]));
            };
            auto& pr = present[i];
            auto& tn = tainted[i];
            pr.assign(static_cast<std::size_t>(ch[i]), 1);
            tn.assign(static_cast<std::size_t>(ch[i]), 0);
            switch (nd.kind) {
                case LayerKind::Input:
                    break;
                case LayerKind::Conv:
                case LayerKind::FullyConnected: {
                    // mixes all input channels: any removed or tainted input
                    // taints every output
                    bool any = false;
                    for (std::size_t c = 0; c < present[in(0)].size(); ++c)
                        any = any || !present[in(0)][c] || tainted[in(0)][c];
                    for (std::size_t c = 0; c < pr.size(); ++c) tn[c] = any;
                    if (auto it = gone.find(nd.id); it != gone.end())
                        for (int c : it->second) pr[static_cast<std::size_t>(c)] = 0;
                    break;
                }
                case LayerKind::DepthwiseConv: {
                    pr = present[in(0)];
                    tn = tainted[in(0)];
                    if (auto it = gone.find(nd.id); it != gone.end())
                        for (int c : it->second) pr[static_cast<std::size_t>(c)] = 0;
                    break;
                }
                case LayerKind::Add: {
                    pr = present[in(0)];
                    tn = tainted[in(0)];
                    for (std::size_t k = 1; k < nd.inputs.size(); ++k)
                        for (std::size_t c = 0; c < pr.size(); ++c) {
                            pr[c] = pr[c] && present[in(k)][c];
                            tn[c] = tn[c] || tainted[in(k)][c];
                        }
                    break;
                }
                case LayerKind::Concat: {
                    pr.clear();
                    tn.clear();
                    for (std::size_t k = 0; k < nd.inputs.size(); ++k) {
                        pr.insert(pr.end(), present[in(k)].begin(), present[in(k)].end());
                        tn.insert(tn.end(), tainted[in(k)].begin(), tainted[in(k)].end());
                    }
                    break;
                }
                default:  // per-channel pass-through
                    pr = present[in(0)];
                    tn = tainted[in(0)];
                    break;
            }
        }
    }
};

// channel-wise activation values of node `i`, channel `c` for every batch
// element and spatial position
std::vector<double> channel_values(const TensorPtr& act, int c) {
    std::vector<double> out;
    int n = act->dim(0);
    int channels = act->dim(1);
    std::int64_t inner = act->rank() == 4 ? static_cast<std::int64_t>(act->dim(2)) * act->dim(3) : 1;
    for (int b = 0; b < n; ++b) {
        const double* p = act->data.data() + (static_cast<std::int64_t>(b) * channels + c) * inner;
        out.insert(out.end(), p, p + inner);
    }
    return out;
}

void check_single_group_removals(const NetworkGraph& g, Rng& rng) {
    auto groups = resolve_prune_groups(g);
    auto batch = tptest::random_tensor({2, g.input_c, g.input_h, g.input_w}, rng);
    auto base = forward(g, batch, false, nullptr);
    for (const auto& grp : groups) {
        CAPTURE(grp.id);
        auto g2 = remove_groups(g, {grp});
        auto out = forward(g2, batch, false, nullptr);  // shape-valid by construction
        ChannelOracle oracle(g, grp);
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const auto& pr = oracle.present[i];
            const auto& tn = oracle.tainted[i];
            int new_c = 0;
            for (std::size_t c = 0; c < pr.size(); ++c) {
                if (!pr[c]) continue;
                if (!tn[c]) {
                    auto want = channel_values(base.activations[i], static_cast<int>(c));
                    auto got = channel_values(out.activations[i], new_c);
                    REQUIRE(want.size() == got.size());
                    for (std::size_t v = 0; v < want.size(); ++v) REQUIRE(want[v] == got[v]);
                }
                ++new_c;
            }
            CHECK(new_c == static_cast<int>(out.activations[i]->dim(1)));
        }
    }
}

void check_zero_group_removals(const NetworkGraph& g, Rng& rng) {
    auto groups = resolve_prune_groups(g);
    auto batch = tptest::random_tensor({2, g.input_c, g.input_h, g.input_w}, rng);
    for (std::size_t pick : {std::size_t(0), groups.size() / 2, groups.size() - 1}) {
        auto gz = g.clone();
        zero_group_params(gz, groups[pick]);
        auto before = forward(gz, batch, false, nullptr);
        auto g2 = remove_groups(gz, {groups[pick]});
        auto after = forward(g2, batch, false, nullptr);
        REQUIRE(before.logits->data.size() == after.logits->data.size());
        for (std::size_t i = 0; i < before.logits->data.size(); ++i)
            CHECK(std::fabs(before.logits->data[i] - after.logits->data[i]) < 1e-6);
    }
}

}  // namespace

TEST_CASE("sequential net: one group per channel with matching consumer slice") {
    Rng rng(21);
    auto g = tptest::make_two_conv_net(1, 8, 3, 5, 4, rng);
    auto groups = resolve_prune_groups(g);
    // 3 conv1 channels + 5 conv2 channels
    REQUIRE(groups.size() == 8);
    int conv1_groups = 0;
    for (const auto& grp : groups) {
        REQUIRE(grp.members.size() == 1);
        if (grp.members[0].node == "conv1") {
            ++conv1_groups;
            REQUIRE(grp.consumers.size() == 1);
            CHECK(grp.consumers[0].node == "conv2");
            CHECK(grp.consumers[0].channel == grp.members[0].channel);
            REQUIRE(grp.bn_params.size() == 1);
            CHECK(grp.bn_params[0].node == "conv1_bn");
        } else {
            CHECK(grp.members[0].node == "conv2");
            REQUIRE(grp.consumers.size() == 1);
            CHECK(grp.consumers[0].node == "head");
        }
    }
    CHECK(conv1_groups == 3);
}

TEST_CASE("group partition covers every prunable channel exactly once") {
    Rng rng(22);
    for (const auto& cfg : {toy_fire(), toy_invres(), toy_bottleneck()}) {
        auto g = build_architecture(cfg, rng);
        auto groups = resolve_prune_groups(g);
        std::map<std::string, std::set<int>> seen;
        for (const auto& grp : groups) {
            for (const auto& m : grp.members) {
                CHECK(seen[m.node].insert(m.channel).second);  // pairwise disjoint
            }
        }
        for (const auto& nd : g.nodes) {
            if (nd.kind == LayerKind::Conv || nd.kind == LayerKind::DepthwiseConv) {
                CHECK(static_cast<int>(seen[nd.id].size()) == nd.weight->dim(0));
            }
        }
    }
}

TEST_CASE("residual chains couple trunk channels across blocks") {
    Rng rng(23);
    auto g = build_architecture(toy_bottleneck(), rng);
    auto groups = resolve_prune_groups(g);
    // stage 1: restore convs of all 3 blocks plus the projection share groups
    int stage1_trunk = 0;
    for (const auto& grp : groups) {
        std::set<std::string> nodes;
        for (const auto& m : grp.members) nodes.insert(m.node);
        if (nodes.count("stage1_block1_restore")) {
            ++stage1_trunk;
            CHECK(nodes.count("stage1_block1_proj"));
            CHECK(nodes.count("stage1_block2_restore"));
            CHECK(nodes.count("stage1_block3_restore"));
            CHECK(grp.members.size() == 4);
        }
    }
    CHECK(stage1_trunk == 8);  // 4 * reduce(2)
}

TEST_CASE("depthwise channels are fused with their expansion conv") {
    Rng rng(24);
    auto g = build_architecture(toy_invres(), rng);
    auto groups = resolve_prune_groups(g);
    bool found = false;
    for (const auto& grp : groups) {
        std::set<std::string> nodes;
        for (const auto& m : grp.members) nodes.insert(m.node);
        if (nodes.count("block1_expand")) {
            found = true;
            CHECK(nodes.count("block1_dw"));
        }
        // projections of the two stride-1 blocks chain through the add
        if (nodes.count("block1_project")) CHECK(nodes.count("block2_project"));
    }
    CHECK(found);
}

TEST_CASE("exhaustive single-group removal: shape-valid, untouched channels bit-identical") {
    Rng rng(25);
    for (const auto& cfg : {toy_fire(), toy_invres(), toy_bottleneck()}) {
        CAPTURE(cfg.family);
        auto g = build_architecture(cfg, rng);
        check_single_group_removals(g, rng);
    }
}

TEST_CASE("zero-weight group removal leaves the function unchanged") {
    Rng rng(26);
    for (const auto& cfg : {toy_fire(), toy_invres(), toy_bottleneck()}) {
        auto g = build_architecture(cfg, rng);
        check_zero_group_removals(g, rng);
    }
}

TEST_CASE("removing zero groups is the identity (bit-identical serialization)") {
    Rng rng(27);
    auto g = build_architecture(toy_fire(), rng);
    auto g2 = remove_groups(g, {});
    CHECK(serialize(g, 7) == serialize(g2, 7));
}

TEST_CASE("learnable count drops by the closed-form amount") {
    Rng rng(28);
    auto g = tptest::make_two_conv_net(1, 8, 4, 6, 3, rng);
    auto groups = resolve_prune_groups(g);
    std::vector<PruneGroup> conv1_groups;
    for (const auto& grp : groups)
        if (grp.members[0].node == "conv1") conv1_groups.push_back(grp);
    const int k = 2;
    std::vector<PruneGroup> chosen(conv1_groups.begin(), conv1_groups.begin() + k);
    auto before = g.count_learnables();
    auto g2 = remove_groups(g, chosen);
    auto after = g2.count_learnables();
    // per channel: own 3x3 row over 1 input + consumer column (6 filters x 9)
    // + 2 batch-norm params
    CHECK(before - after == k * (9 * 1 + 6 * 9 + 2));
}

TEST_CASE("group ids unknown to the graph raise errors") {
    Rng rng(29);
    auto g = tptest::make_two_conv_net(1, 8, 3, 5, 4, rng);
    auto groups = resolve_prune_groups(g);
    CHECK_THROWS_AS(remove_groups_by_id(g, groups, {"g99999"}), Error);
    PruneGroup bogus;
    bogus.id = "bogus";
    bogus.members = {{"not_a_node", 0}};
    CHECK_THROWS_AS(remove_groups(g, {bogus}), Error);
}

TEST_CASE("removal refuses to empty a layer") {
    Rng rng(30);
    auto g = tptest::make_two_conv_net(1, 8, 2, 3, 3, rng);
    auto groups = resolve_prune_groups(g);
    std::vector<PruneGroup> both;
    for (const auto& grp : groups)
        if (grp.members[0].node == "conv1") both.push_back(grp);
    REQUIRE(both.size() == 2);
    CHECK_THROWS_WITH_AS(remove_groups(g, both), doctest::Contains("empty"), Error);
}

TEST_CASE("taylor scores: direct evaluation and zero-gradient cases") {
    // single-parameter group: w=2, g=3 -> (2*3)^2 = 36
    NetworkGraph g;
    g.family = "toy";
    g.input_h = g.input_w = 4;
    g.input_c = 1;
    LayerNode input;
    input.id = "input";
    input.kind = LayerKind::Input;
    g.nodes.push_back(input);
    LayerNode conv;
    conv.id = "c";
    conv.kind = LayerKind::Conv;
    conv.inputs = {"input"};
    conv.kernel_h = conv.kernel_w = 1;
    conv.weight = Tensor::from({1, 1, 1, 1}, {2.0});
    conv.weight->requires_grad = true;
    g.nodes.push_back(conv);
    g.validate();
    auto groups = resolve_prune_groups(g);
    REQUIRE(groups.size() == 1);
    CHECK_THROWS_WITH_AS(group_scores(g, groups), doctest::Contains("missing gradients"), Error);
    g.node("c").weight->ensure_grad();
    g.node("c").weight->grad[0] = 3.0;
    auto scores = group_scores(g, groups);
    CHECK(scores[0] == doctest::Approx(36.0).epsilon(1e-12));
    g.node("c").weight->zero_grad();
    CHECK(group_scores(g, groups)[0] == 0.0);
}

TEST_CASE("pruned graphs round-trip through the model format with identical outputs") {
    Rng rng(31);
    auto g = build_architecture(toy_fire(), rng);
    auto groups = resolve_prune_groups(g);
    std::vector<PruneGroup> chosen = {groups[1], groups[7], groups[groups.size() - 2]};
    auto g2 = remove_groups(g, chosen);
    auto bytes = serialize(g2, 5);
    auto g3 = deserialize(bytes);
    CHECK(serialize(g3, 5) == bytes);
    auto batch = tptest::random_tensor({2, 1, 10, 10}, rng);
    auto a = forward(g2, batch, false, nullptr);
    auto b = forward(g3, batch, false, nullptr);
    CHECK(a.logits->data == b.logits->data);
}
