// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "doctest.h"
#include "testutil.hpp"
#include "tp/groups.hpp"
#include "tp/verify.hpp"

using namespace tp;

namespace {

// independent EER route: naive counting at every candidate threshold plus the
// same linear solve at the sign change
double eer_threshold_oracle(const std::vector<double>& genuine,
                            const std::vector<double>& impostor) {
    std::vector<double> ts;
    for (double v : genuine) ts.push_back(v);
    for (double v : impostor) ts.push_back(v);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    ts.insert(ts.begin(), ts.front() - 1.0);
    ts.push_back(ts.back() + 1.0);
    auto far_at = [&](double t) {
        int n = 0;
        for (double v : impostor) n += v >= t ? 1 : 0;
        return static_cast<double>(n) / impostor.size();
    };
    auto frr_at = [&](double t) {
        int n = 0;
        for (double v : genuine) n += v < t ? 1 : 0;
        return static_cast<double>(n) / genuine.size();
    };
    double pf = far_at(ts[0]), pr = frr_at(ts[0]);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        double f = far_at(ts[i]), r = frr_at(ts[i]);
        double d = f - r, pd = pf - pr;
        if (d <= 0.0) {
            if (d == 0.0) return f;
            double alpha = pd / (pd - d);
            return pf + alpha * (f - pf);
        }
        pf = f;
        pr = r;
    }
    return -1.0;
}

// brute-force midpoint at the |FAR-FRR| minimiser, for the coarse sanity bound
double eer_midpoint_oracle(const std::vector<double>& genuine,
                           const std::vector<double>& impostor) {
    std::vector<double> ts;
    for (double v : genuine) ts.push_back(v);
    for (double v : impostor) ts.push_back(v);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    ts.push_back(ts.back() + 1.0);
    double best = 2.0, best_mid = 0.0;
    for (double t : ts) {
        int fa = 0, fr = 0;
        for (double v : impostor) fa += v >= t ? 1 : 0;
        for (double v : genuine) fr += v < t ? 1 : 0;
        double far = static_cast<double>(fa) / impostor.size();
        double frr = static_cast<double>(fr) / genuine.size();
        if (std::fabs(far - frr) < best) {
            best = std::fabs(far - frr);
            best_mid = (far + frr) / 2.0;
        }
    }
    return best_mid;
}

}  // namespace

TEST_CASE("protocol counts match the published table at full scale") {
    ProtocolConfig cfg;
    cfg.subjects = 368;
    cfg.images_per_pose = 10;
    cfg.poses = 3;
    cfg.impostor_window = 100;
    cfg.template_size = 1;
    auto pairs = build_protocol(cfg);
    std::int64_t genuine = 0, impostor = 0;
    for (const auto& p : pairs) (p.genuine ? genuine : impostor)++;
    CHECK(genuine == 160080);
    CHECK(impostor == 220800);

    cfg.template_size = 5;
    pairs = build_protocol(cfg);
    genuine = impostor = 0;
    for (const auto& p : pairs) (p.genuine ? genuine : impostor)++;
    CHECK(genuine == 5520);
    CHECK(impostor == 220800);
}

TEST_CASE("tiny protocol matches the exhaustive enumeration") {
    ProtocolConfig cfg;
    cfg.subjects = 4;
    cfg.images_per_pose = 2;
    cfg.poses = 3;
    cfg.impostor_window = 2;
    cfg.template_size = 1;
    auto pairs = build_protocol(cfg);
    std::int64_t genuine = 0, impostor = 0;
    for (const auto& p : pairs) (p.genuine ? genuine : impostor)++;
    CHECK(genuine == 60);   // 3*4*1 + 3*4*4
    CHECK(impostor == 48);  // 3*4*2 + 3*4*2
}

TEST_CASE("protocol counts follow the closed forms for random small configs") {
    Rng rng(71);
    for (int trial = 0; trial < 30; ++trial) {
        ProtocolConfig cfg;
        cfg.poses = static_cast<int>(rng.uniform_int(1, 4));
        cfg.template_size = rng.uniform() < 0.5 ? 1 : 5;
        int t = static_cast<int>(rng.uniform_int(2, 4));  // templates per pose
        cfg.images_per_pose = t * cfg.template_size;
        cfg.impostor_window = static_cast<int>(rng.uniform_int(1, 4));
        cfg.subjects = cfg.impostor_window + static_cast<int>(rng.uniform_int(1, 5));
        auto pairs = build_protocol(cfg);

        std::int64_t n = cfg.subjects, P = cfg.poses, W = cfg.impostor_window;
        std::int64_t genuine_same = P * n * (t * (t - 1) / 2);
        std::int64_t genuine_cross = (P * (P - 1) / 2) * n * t * t;
        std::int64_t impostors = (P + P * (P - 1) / 2) * n * W;
        std::int64_t genuine = 0, impostor = 0;
        std::set<std::tuple<int, int, int, int, int, int>> seen;
        for (const auto& p : pairs) {
            (p.genuine ? genuine : impostor)++;
            // no self comparisons
            CHECK((p.subject_a != p.subject_b || p.pose_a != p.pose_b ||
                   p.template_a != p.template_b));
            // duplicates in either order are forbidden
            auto key = std::make_tuple(p.subject_a, p.pose_a, p.template_a, p.subject_b,
                                       p.pose_b, p.template_b);
            auto mirror = std::make_tuple(p.subject_b, p.pose_b, p.template_b, p.subject_a,
                                          p.pose_a, p.template_a);
            CHECK(seen.count(key) == 0);
            CHECK(seen.count(mirror) == 0);
            seen.insert(key);
        }
        CHECK(genuine == genuine_same + genuine_cross);
        CHECK(impostor == impostors);
    }
}

TEST_CASE("protocol rejects rosters smaller than the impostor window") {
    ProtocolConfig cfg;
    cfg.subjects = 80;
    cfg.images_per_pose = 10;
    cfg.impostor_window = 100;
    CHECK_THROWS_WITH_AS(build_protocol(cfg), doctest::Contains("impostor window"), ConfigError);
}

TEST_CASE("cosine score: identity, orthogonality, scale invariance, zero norm") {
    std::vector<double> a{1.0, 2.0, -1.0};
    CHECK(cosine_score(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> x{1.0, 0.0}, y{0.0, 3.0};
    CHECK(cosine_score(x, y) == doctest::Approx(0.0));
    std::vector<double> b{-0.3, 0.9, 2.2};
    double base = cosine_score(a, b);
    for (double lambda : {0.25, 3.0, 1234.5}) {
        std::vector<double> scaled;
        for (double v : a) scaled.push_back(lambda * v);
        CHECK(std::fabs(cosine_score(scaled, b) - base) < 1e-12);
    }
    std::vector<double> zero{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(cosine_score(zero, a), NumericalError);
}

TEST_CASE("EER: perfect separation, chance level, class errors") {
    std::vector<double> genuine{0.8, 0.9, 0.95}, impostor{0.1, 0.2, 0.3};
    auto r = compute_eer(genuine, impostor);
    CHECK(r.eer == doctest::Approx(0.0));

    Rng rng(72);
    std::vector<double> g2, i2;
    for (int i = 0; i < 100000; ++i) {
        // identical distributions: EER tends to 0.5
        g2.push_back(rng.normal());
        i2.push_back(rng.normal());
    }
    auto chance = compute_eer(g2, i2);
    CHECK(std::fabs(chance.eer - 0.5) < 0.01);

    CHECK_THROWS_AS(compute_eer(std::vector<double>{}, impostor), Error);
}

TEST_CASE("EER matches the exhaustive threshold oracle within 1e-9") {
    Rng rng(73);
    for (int trial = 0; trial < 1000; ++trial) {
        int ng = static_cast<int>(rng.uniform_int(5, 60));
        int ni = static_cast<int>(rng.uniform_int(5, 60));
        double sep = rng.uniform(-0.5, 1.5);
        std::vector<double> genuine, impostor;
        for (int i = 0; i < ng; ++i) genuine.push_back(rng.normal(sep, 1.0));
        for (int i = 0; i < ni; ++i) impostor.push_back(rng.normal(0.0, 1.0));
        if (rng.uniform() < 0.3) {
            // inject ties
            genuine[0] = impostor[0];
            if (ng > 2 && ni > 2) genuine[1] = genuine[2];
        }
        auto mine = compute_eer(genuine, impostor);
        double oracle = eer_threshold_oracle(genuine, impostor);
        CHECK(std::fabs(mine.eer - oracle) < 1e-9);
        double mid = eer_midpoint_oracle(genuine, impostor);
        double slack = 1.0 / std::min(ng, ni);
        CHECK(std::fabs(mine.eer - mid) <= slack + 1e-12);
    }
}

TEST_CASE("EER is invariant under strictly monotone score transforms") {
    Rng rng(74);
    std::vector<double> genuine, impostor;
    for (int i = 0; i < 200; ++i) {
        genuine.push_back(rng.normal(0.8, 0.4));
        impostor.push_back(rng.normal(0.0, 0.4));
    }
    auto base = compute_eer(genuine, impostor);
    auto transform = [](std::vector<double> v, auto f) {
        for (auto& x : v) x = f(x);
        return v;
    };
    for (int which = 0; which < 3; ++which) {
        auto f = [which](double x) {
            if (which == 0) return x * x * x;
            if (which == 1) return std::exp(x);
            return 2.0 * x + 5.0;
        };
        auto r = compute_eer(transform(genuine, f), transform(impostor, f));
        CHECK(r.eer == base.eer);  // counts are rank statistics
    }
}

TEST_CASE("descriptor extraction: flip averaging identities") {
    Rng rng(75);
    auto g = tptest::make_two_conv_net(1, 8, 3, 5, 4, rng);

    // horizontally symmetric input: descriptor equals the raw embedding
    auto sym = Tensor::zeros({1, 10, 10});
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            sym->data[static_cast<std::size_t>(y) * 10 + x] = std::min(x, 9 - x) * 0.2 + y * 0.05;
    auto d = extract_descriptor(g, sym, 10, 8);
    auto prepped = eval_preprocess(sym, 10, 8);
    auto plain = forward(g, batch_images({prepped}), false, nullptr);
    REQUIRE(d.values.size() == plain.embedding->data.size());
    for (std::size_t i = 0; i < d.values.size(); ++i)
        CHECK(d.values[i] == doctest::Approx(plain.embedding->data[i]).epsilon(1e-12));

    // mirrored input gives the identical descriptor
    auto img = tptest::random_tensor({1, 10, 10}, rng);
    auto d1 = extract_descriptor(g, img, 10, 8);
    auto d2 = extract_descriptor(g, hflip(img), 10, 8);
    REQUIRE(d1.values.size() == d2.values.size());
    for (std::size_t i = 0; i < d1.values.size(); ++i) CHECK(d1.values[i] == d2.values[i]);
}

TEST_CASE("descriptor length tracks the embedding size through pruning") {
    Rng rng(76);
    auto g = tptest::make_two_conv_net(1, 10, 4, 6, 3, rng);
    auto img = tptest::random_tensor({1, 10, 10}, rng);
    auto groups = resolve_prune_groups(g);
    std::vector<PruneGroup> conv2_groups;
    for (const auto& grp : groups)
        if (grp.members[0].node == "conv2") conv2_groups.push_back(grp);
    auto g2 = remove_groups(g, {conv2_groups[0], conv2_groups[2]});
    CHECK(g2.embedding_size() == 4);
    auto d = extract_descriptor(g2, img, 10, 10);
    CHECK(d.values.size() == 4);
}

TEST_CASE("templates average their member descriptors") {
    ProtocolConfig cfg;
    cfg.subjects = 2;
    cfg.images_per_pose = 10;
    cfg.poses = 1;
    cfg.template_size = 5;
    cfg.impostor_window = 1;
    std::vector<Descriptor> ds;
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < 10; ++i) {
            Descriptor d;
            d.subject = s;
            d.pose = 0;
            d.pose_index = i;
            d.values = {static_cast<double>(i), static_cast<double>(s)};
            ds.push_back(d);
        }
    auto tpls = build_templates(ds, cfg);
    REQUIRE(tpls.size() == 4);  // 2 subjects x 2 templates
    CHECK(tpls[0].values[0] == doctest::Approx(2.0));  // mean of 0..4
    CHECK(tpls[1].values[0] == doctest::Approx(7.0));  // mean of 5..9
    CHECK(tpls[0].member_indices.size() == 5);
}

TEST_CASE("score_protocol produces the protocol's score multiset") {
    Rng rng(77);
    SyntheticIdentityConfig dc;
    dc.identities = 4;
    dc.images_per_identity = 6;
    dc.image_size = 10;
    dc.seed = 3;
    auto data = generate_synthetic_identities(dc);
    auto g = tptest::make_two_conv_net(1, 8, 3, 5, 4, rng);
    ProtocolConfig pc;
    pc.subjects = 4;
    pc.images_per_pose = 2;
    pc.poses = 3;
    pc.template_size = 1;
    pc.impostor_window = 2;
    auto scores = score_protocol(g, data, pc, 10, 8);
    CHECK(scores.records.size() == 108);  // 60 genuine + 48 impostor
    for (const auto& r : scores.records) {
        CHECK(r.score >= -1.0);
        CHECK(r.score <= 1.0);
    }
    auto eer = compute_eer(scores);
    CHECK(eer.eer >= 0.0);
    CHECK(eer.eer <= 1.0);
}
