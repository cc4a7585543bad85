// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tp/artifacts.hpp"
#include "tp/groups.hpp"

namespace tp {

namespace {

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

int parse_iteration_from_stem(const std::string& stem) {
    auto at = stem.find("iter");
    if (at == std::string::npos) return 0;
    at += 4;
    int v = 0;
    bool any = false;
    while (at < stem.size() && stem[at] >= '0' && stem[at] <= '9') {
        v = v * 10 + (stem[at] - '0');
        ++at;
        any = true;
    }
    return any ? v : 0;
}

void require_hash(std::uint64_t found, std::uint64_t expected, const std::string& what) {
    if (found != expected) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%s carries config hash 0x%016llx but the current config hashes to "
                      "0x%016llx; refusing to resume",
                      what.c_str(), static_cast<unsigned long long>(found),
                      static_cast<unsigned long long>(expected));
        throw ConfigError(buf);
    }
}

Dataset load_run_dataset(const ExperimentConfig& cfg, const RunPaths& rp) {
    std::uint64_t h = 0;
    auto ds = load_dataset(rp.dataset(), &h);
    require_hash(h, cfg.hash, "dataset '" + rp.dataset().string() + "'");
    split_train_val(ds, 0.02);
    return ds;
}

}  // namespace

std::filesystem::path RunPaths::checkpoint(int iteration) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ckpt_iter%04d.tpnt", iteration);
    return prune_dir() / buf;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const Overrides& ov) {
    ExperimentConfig cfg;
    cfg.sections = parse_kv_file(path);
    // flags override config keys before hashing the effective config
    if (ov.seed) cfg.sections[""]["seed"] = std::to_string(*ov.seed);
    if (ov.out_dir) cfg.sections["run"]["out"] = *ov.out_dir;
    if (ov.threads) cfg.sections["run"]["threads"] = std::to_string(*ov.threads);
    KvView view(cfg.sections);

    cfg.seed = static_cast<std::uint64_t>(view.get_int("", "seed", 1));
    cfg.out_dir = view.get("run", "out", "run");
    cfg.threads = static_cast<int>(view.get_int("run", "threads", 1));
    if (cfg.threads < 0) throw ConfigError("run: threads must be >= 0");

    cfg.data.identities = static_cast<int>(view.get_int("data", "identities", 10));
    cfg.data.images_per_identity =
        static_cast<int>(view.get_int("data", "images_per_identity", 30));
    cfg.data.image_size = static_cast<int>(view.get_int("data", "image_size", 26));
    cfg.data.poses = static_cast<int>(view.get_int("data", "poses", 3));
    cfg.data.noise_level = view.get_double("data", "noise_level", 0.05);
    cfg.data.seed = derive_seed(cfg.seed, "data");
    cfg.data.validate();

    if (view.has("arch", "file")) {
        cfg.arch = ScaleConfig::from_file(view.require("arch", "file"));
    } else {
        auto it = cfg.sections.find("arch");
        if (it == cfg.sections.end()) throw ConfigError("config: missing [arch] section");
        cfg.arch = ScaleConfig::from_kv(it->second);
    }
    if (cfg.arch.class_count != cfg.data.identities) {
        throw ConfigError("config: arch class_count (" + std::to_string(cfg.arch.class_count) +
                          ") must equal data identities (" +
                          std::to_string(cfg.data.identities) + ")");
    }

    cfg.train.batch_size = static_cast<int>(view.get_int("train", "batch", 16));
    if (view.has("train", "ladder"))
        cfg.train.lr_ladder = parse_double_list(view.require("train", "ladder"));
    cfg.train.patience = static_cast<int>(view.get_int("train", "patience", 3));
    cfg.train.improve_rel = view.get_double("train", "improve_rel", 1e-4);
    cfg.train.momentum = view.get_double("train", "momentum", 0.9);
    cfg.train.max_epochs = static_cast<int>(view.get_int("train", "max_epochs", 50));
    cfg.train.use_augment = view.get_bool("train", "augment", true);
    cfg.train.resize_short = static_cast<int>(
        view.get_int("train", "resize_short", cfg.data.image_size));
    cfg.train.crop = static_cast<int>(view.get_int("train", "crop", cfg.arch.input_h));
    cfg.train.seed = derive_seed(cfg.seed, "train");
    cfg.train.validate();
    if (cfg.train.crop != cfg.arch.input_h || cfg.train.crop != cfg.arch.input_w) {
        throw ConfigError("config: train crop must equal the architecture input size");
    }

    if (view.has("retrain", "ladder_high"))
        cfg.retrain_ladder_high = parse_double_list(view.require("retrain", "ladder_high"));
    if (view.has("retrain", "ladder_low"))
        cfg.retrain_ladder_low = parse_double_list(view.require("retrain", "ladder_low"));
    cfg.retrain_max_epochs = static_cast<int>(view.get_int("retrain", "max_epochs", 20));

    cfg.prune.fraction = view.get_double("prune", "fraction", 0.01);
    cfg.prune.subset_fraction = view.get_double("prune", "subset_fraction", 0.25);
    cfg.prune.target_sparsity = view.get_double("prune", "target_sparsity", 0.5);
    cfg.prune.max_epochs = static_cast<int>(view.get_int("prune", "max_epochs", 0));
    cfg.prune.lr = view.get_double("prune", "lr", 0.01);
    cfg.prune.momentum = view.get_double("prune", "momentum", 0.9);
    cfg.prune.batch_size = static_cast<int>(view.get_int("prune", "batch", 16));
    cfg.prune.resample_subset = view.get_bool("prune", "resample_subset", false);
    cfg.prune.normalize_by_size = view.get_bool("prune", "normalize_by_size", false);
    cfg.prune.eval_interval = static_cast<int>(view.get_int("prune", "eval_interval", 10));
    cfg.prune.use_augment = cfg.train.use_augment;
    cfg.prune.resize_short = cfg.train.resize_short;
    cfg.prune.crop = cfg.train.crop;
    cfg.prune.seed = derive_seed(cfg.seed, "prune");
    cfg.prune.validate();

    cfg.verify_window = static_cast<int>(view.get_int("verify", "impostor_window", 5));

    cfg.lime.grid_rows = static_cast<int>(view.get_int("explain", "grid_rows", 8));
    cfg.lime.grid_cols = static_cast<int>(view.get_int("explain", "grid_cols", 8));
    cfg.lime.samples = static_cast<int>(view.get_int("explain", "samples", 256));
    cfg.lime.seed = derive_seed(cfg.seed, "lime");
    std::string fill = view.get("explain", "fill", "auto");
    cfg.lime.fill = fill == "auto" ? std::nan("") : std::stod(fill);  // NaN = dataset mean
    cfg.explain_images = static_cast<int>(view.get_int("explain", "images", 16));
    cfg.explain_bins = static_cast<int>(view.get_int("explain", "bins", 25));

    cfg.hash = config_hash(cfg.sections);
    return cfg;
}

void cmd_gen_data(const ExperimentConfig& cfg) {
    RunPaths rp{cfg.out_dir};
    std::filesystem::create_directories(rp.root);
    if (std::filesystem::exists(rp.dataset())) {
        std::uint64_t h = 0;
        load_dataset(rp.dataset(), &h);
        require_hash(h, cfg.hash, "existing dataset");
    }
    auto ds = generate_synthetic_identities(cfg.data);
    save_dataset(rp.dataset(), ds, cfg.hash);
}

void cmd_train(const ExperimentConfig& cfg, const std::optional<std::string>& dataset_path) {
    RunPaths rp{cfg.out_dir};
    std::filesystem::create_directories(rp.root);
    Dataset ds;
    if (dataset_path) {
        std::uint64_t h = 0;
        ds = load_dataset(*dataset_path, &h);
        require_hash(h, cfg.hash, "dataset '" + *dataset_path + "'");
        split_train_val(ds, 0.02);
    } else {
        if (!std::filesystem::exists(rp.dataset()))
            throw IoError("missing input: " + rp.dataset().string() + " (run gen-data first)");
        ds = load_run_dataset(cfg, rp);
    }
    Rng rng(derive_seed(cfg.seed, "init"));
    auto graph = build_architecture(cfg.arch, rng);
    auto result = train(graph, ds, cfg.train);
    save_model(rp.initial_model(), graph, cfg.hash);
    write_train_history_csv(rp.train_history(), result.history, cfg.hash);
}

std::pair<EerResult, EerResult> evaluate_eers(const ExperimentConfig& cfg,
                                              const NetworkGraph& graph, const Dataset& ds) {
    ProtocolConfig pc;
    pc.subjects = ds.class_count;
    pc.images_per_pose = ds.images_per_pose;
    pc.poses = ds.poses;
    pc.impostor_window = cfg.verify_window;
    pc.template_size = 1;
    auto s1 = score_protocol(graph, ds, pc, cfg.train.resize_short, cfg.train.crop);
    pc.template_size = 5;
    auto s5 = score_protocol(graph, ds, pc, cfg.train.resize_short, cfg.train.crop);
    return {compute_eer(s1), compute_eer(s5)};
}

void cmd_prune(const ExperimentConfig& cfg, const std::optional<std::string>& checkpoint) {
    RunPaths rp{cfg.out_dir};
    std::filesystem::create_directories(rp.prune_dir());
    auto ds = load_run_dataset(cfg, rp);

    std::filesystem::path start =
        checkpoint ? std::filesystem::path(*checkpoint) : rp.initial_model();
    if (!std::filesystem::exists(start))
        throw IoError("missing input: " + start.string() + " (run train first)");
    std::uint64_t h = 0;
    auto graph = load_model(start, &h);
    require_hash(h, cfg.hash, "checkpoint '" + start.string() + "'");

    int start_iteration = parse_iteration_from_stem(start.stem().string());
    std::int64_t initial_override = -1;
    std::string previous_rows;
    if (start_iteration > 0) {
        // resuming: the trajectory so far must exist and match this config
        require_hash(read_hash_header(rp.trajectory()), cfg.hash,
                     "trajectory '" + rp.trajectory().string() + "'");
        std::ifstream f(rp.trajectory());
        std::string line;
        std::getline(f, line);  // hash header
        std::getline(f, line);
        unsigned long long init = 0;
        if (std::sscanf(line.c_str(), "# initial_filters=%llu", &init) != 1)
            throw IoError("trajectory missing initial_filters record");
        initial_override = static_cast<std::int64_t>(init);
        std::getline(f, line);  // column header
        while (std::getline(f, line)) {
            int iter = 0;
            if (std::sscanf(line.c_str(), "%d,", &iter) == 1 && iter <= start_iteration)
                previous_rows += line + "\n";
        }
    }

    auto eval_hook = [&](const NetworkGraph& g, int) {
        auto [e1, e5] = evaluate_eers(cfg, g, ds);
        return std::make_optional(std::make_pair(e1.eer, e5.eer));
    };
    auto sink = [&](int iteration, const NetworkGraph& g) {
        save_model(rp.checkpoint(iteration), g, cfg.hash);
    };

    auto traj = run_pruning(graph, ds, cfg.prune, eval_hook, sink, start_iteration,
                            initial_override);

    // write trajectory (with the initial-filter record so runs can resume),
    // filters-per-layer matrix and removal log
    {
        std::ofstream f(rp.trajectory(), std::ios::trunc);
        if (!f) throw IoError("cannot write " + rp.trajectory().string());
        f << hash_header(cfg.hash);
        f << "# initial_filters=" << traj.initial_filters << "\n";
        f << "iteration,pruned_fraction,learnables,embedding_size,eer_1to1,eer_5to5\n";
        f << previous_rows;
        for (const auto& r : traj.records) {
            f << r.iteration << ',' << format_double(r.pruned_fraction) << ',' << r.learnables
              << ',' << r.embedding_size << ',';
            if (r.eer_1to1) f << format_double(*r.eer_1to1);
            f << ',';
            if (r.eer_5to5) f << format_double(*r.eer_5to5);
            f << '\n';
        }
    }
    write_filters_per_layer_csv(rp.filters_per_layer(), traj, cfg.hash);
    write_removed_groups_csv(rp.removed_groups(), traj, cfg.hash);
}

void cmd_retrain(const ExperimentConfig& cfg, const std::string& checkpoint,
                 const std::string& variant) {
    RunPaths rp{cfg.out_dir};
    std::filesystem::create_directories(rp.retrain_dir());
    auto ds = load_run_dataset(cfg, rp);
    std::uint64_t h = 0;
    auto graph = load_model(checkpoint, &h);
    require_hash(h, cfg.hash, "checkpoint '" + checkpoint + "'");

    TrainConfig tc = cfg.train;
    if (variant == "high") {
        tc.lr_ladder = cfg.retrain_ladder_high;
    } else if (variant == "low") {
        tc.lr_ladder = cfg.retrain_ladder_low;
    } else {
        throw ConfigError("retrain: variant must be 'high' or 'low'");
    }
    tc.max_epochs = cfg.retrain_max_epochs;
    tc.seed = derive_seed(cfg.seed, "retrain-" + variant);
    auto result = retrain(graph, ds, tc);

    std::string stem = std::filesystem::path(checkpoint).stem().string();
    std::string lr_tag = format_double(tc.lr_ladder.front());
    auto model_out = rp.retrain_dir() / (stem + "_retrained_lr" + lr_tag + ".tpnt");
    auto hist_out = rp.retrain_dir() / (stem + "_retrained_lr" + lr_tag + "_history.csv");
    save_model(model_out, graph, cfg.hash);
    write_train_history_csv(hist_out, result.history, cfg.hash);
}

void cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint) {
    RunPaths rp{cfg.out_dir};
    std::filesystem::create_directories(rp.eval_dir());
    auto ds = load_run_dataset(cfg, rp);
    std::uint64_t h = 0;
    auto graph = load_model(checkpoint, &h);
    require_hash(h, cfg.hash, "checkpoint '" + checkpoint + "'");

    std::string stem = std::filesystem::path(checkpoint).stem().string();
    int iteration = parse_iteration_from_stem(stem);
    std::vector<EerReportRow> rows;
    for (int tsize : {1, 5}) {
        ProtocolConfig pc;
        pc.subjects = ds.class_count;
        pc.images_per_pose = ds.images_per_pose;
        pc.poses = ds.poses;
        pc.impostor_window = cfg.verify_window;
        pc.template_size = tsize;
        auto scores = score_protocol(graph, ds, pc, cfg.train.resize_short, cfg.train.crop);
        write_scores_csv(rp.eval_dir() / ("scores_t" + std::to_string(tsize) + "_" + stem + ".csv"),
                         scores, cfg.hash);
        auto eer = compute_eer(scores);
        rows.push_back({tsize, iteration, eer.eer, eer.threshold});
    }
    write_eer_report_csv(rp.eval_dir() / ("eer_" + stem + ".csv"), rows, cfg.hash);
}

void cmd_explain(const ExperimentConfig& cfg, const std::string& checkpoint_a,
                 const std::string& checkpoint_b) {
    RunPaths rp{cfg.out_dir};
    std::filesystem::create_directories(rp.explain_dir());
    auto ds = load_run_dataset(cfg, rp);
    std::uint64_t ha = 0, hb = 0;
    auto ga = load_model(checkpoint_a, &ha);
    auto gb = load_model(checkpoint_b, &hb);
    require_hash(ha, cfg.hash, "checkpoint '" + checkpoint_a + "'");
    require_hash(hb, cfg.hash, "checkpoint '" + checkpoint_b + "'");

    LimeConfig lime = cfg.lime;
    if (std::isnan(lime.fill)) {
        double mean = 0.0;
        std::int64_t count = 0;
        for (const auto& s : ds.samples) {
            for (double v : s.image->data) mean += v;
            count += s.image->numel();
        }
        lime.fill = mean / static_cast<double>(count);
    }

    int n_images = std::min<int>(cfg.explain_images, static_cast<int>(ds.samples.size()));
    std::vector<int> indices(static_cast<std::size_t>(n_images));
    for (int i = 0; i < n_images; ++i)
        indices[static_cast<std::size_t>(i)] =
            static_cast<int>((static_cast<std::int64_t>(i) * ds.samples.size()) / n_images);

    std::string stem_a = std::filesystem::path(checkpoint_a).stem().string();
    std::string stem_b = std::filesystem::path(checkpoint_b).stem().string();

    std::vector<Heatmap> maps_a, maps_b;
    for (int i : indices) {
        LimeConfig per = lime;
        per.seed = derive_seed(lime.seed, "image", static_cast<std::uint64_t>(i));
        auto img = eval_preprocess(ds.samples[static_cast<std::size_t>(i)].image,
                                   cfg.train.resize_short, cfg.train.crop);
        auto ma = lime_heatmap(ga, img, per);
        ma.source_image = "sample" + std::to_string(i);
        ma.source_network = stem_a;
        auto mb = lime_heatmap(gb, img, per);
        mb.source_image = ma.source_image;
        mb.source_network = stem_b;
        if (static_cast<int>(maps_a.size()) < 4) {  // a few individual examples
            auto tag = "heatmap_" + ma.source_image;
            save_heatmap_pgm(rp.explain_dir() / (tag + "_a.pgm"), ma);
            save_heatmap_pgm(rp.explain_dir() / (tag + "_b.pgm"), mb);
            write_heatmap_csv(rp.explain_dir() / (tag + "_a.csv"), ma, cfg.hash);
            write_heatmap_csv(rp.explain_dir() / (tag + "_b.csv"), mb, cfg.hash);
        }
        maps_a.push_back(std::move(ma));
        maps_b.push_back(std::move(mb));
    }
    auto avg_a = average_heatmap(maps_a);
    avg_a.source_network = stem_a;
    auto avg_b = average_heatmap(maps_b);
    avg_b.source_network = stem_b;
    save_heatmap_pgm(rp.explain_dir() / "average_heatmap_a.pgm", avg_a);
    save_heatmap_pgm(rp.explain_dir() / "average_heatmap_b.pgm", avg_b);
    write_heatmap_csv(rp.explain_dir() / "average_heatmap_a.csv", avg_a, cfg.hash);
    write_heatmap_csv(rp.explain_dir() / "average_heatmap_b.csv", avg_b, cfg.hash);

    auto hist = psnr_histogram(ga, gb, ds, indices, lime, cfg.train.resize_short,
                               cfg.explain_bins);
    auto [e1a, e5a] = evaluate_eers(cfg, ga, ds);
    auto [e1b, e5b] = evaluate_eers(cfg, gb, ds);
    (void)e5a;
    (void)e5b;
    write_psnr_histogram_csv(rp.explain_dir() / "psnr_histogram.csv", hist, e1a.eer, e1b.eer,
                             cfg.hash);
}

namespace {

struct TrajRow {
    int iteration;
    double pruned_fraction;
    double learnables;
    double embedding;
    double eer1, eer5;  // NaN when blank
};

std::vector<TrajRow> read_trajectory(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("artifact missing: '" + path.string() + "'");
    std::vector<TrajRow> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("iteration", 0) == 0) continue;
        TrajRow r{};
        std::stringstream ss(line);
        std::string cell;
        double* fields[] = {nullptr, &r.pruned_fraction, &r.learnables, &r.embedding, &r.eer1,
                            &r.eer5};
        for (int c = 0; c < 6 && std::getline(ss, cell, ','); ++c) {
            if (c == 0) {
                r.iteration = std::stoi(cell);
            } else {
                *fields[c] = cell.empty() ? std::nan("") : std::stod(cell);
            }
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

void cmd_report(const ExperimentConfig& cfg) {
    RunPaths rp{cfg.out_dir};
    // everything the report consumes must exist up front
    std::vector<std::filesystem::path> required = {rp.trajectory(), rp.filters_per_layer(),
                                                   rp.removed_groups()};
    std::string missing;
    for (const auto& p : required) {
        if (!std::filesystem::exists(p)) missing += "\n  " + p.string();
    }
    if (!missing.empty()) throw IoError("report: missing artifacts:" + missing);
    std::filesystem::create_directories(rp.report_dir());

    auto rows = read_trajectory(rp.trajectory());
    require_hash(read_hash_header(rp.trajectory()), cfg.hash, "trajectory");

    // series keyed by retrain lr tag found in eval outputs of retrained models
    std::map<std::string, std::vector<std::pair<int, double>>> retrained_eer1;
    if (std::filesystem::exists(rp.eval_dir())) {
        for (const auto& entry : std::filesystem::directory_iterator(rp.eval_dir())) {
            auto name = entry.path().filename().string();
            if (name.rfind("eer_", 0) != 0) continue;
            auto lr_at = name.find("_retrained_lr");
            if (lr_at == std::string::npos) continue;
            std::string tag = name.substr(lr_at + 13);
            tag = tag.substr(0, tag.find(".csv"));
            std::ifstream f(entry.path());
            std::string line;
            while (std::getline(f, line)) {
                if (line.empty() || line[0] == '#' || line.rfind("template", 0) == 0) continue;
                int tsize = 0, iter = 0;
                double eer = 0.0, thr = 0.0;
                if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &tsize, &iter, &eer, &thr) == 4 &&
                    tsize == 1) {
                    retrained_eer1[tag].push_back({iter, eer});
                }
            }
        }
    }

    auto sparsity_of = [&](int iteration) {
        for (const auto& r : rows)
            if (r.iteration == iteration) return r.pruned_fraction;
        return std::nan("");
    };

    // EER over the pruning process (no-retrain curve plus retrained curves)
    {
        std::vector<Series> series;
        Series base{"no retrain", {}, {}};
        for (const auto& r : rows) {
            if (std::isnan(r.eer1)) continue;
            base.x.push_back(r.pruned_fraction * 100.0);
            base.y.push_back(r.eer1 * 100.0);
        }
        series.push_back(std::move(base));
        for (auto& [tag, pts] : retrained_eer1) {
            std::sort(pts.begin(), pts.end());
            Series s{"retrain lr " + tag, {}, {}};
            for (const auto& [iter, eer] : pts) {
                s.x.push_back(sparsity_of(iter) * 100.0);
                s.y.push_back(eer * 100.0);
            }
            series.push_back(std::move(s));
        }
        write_svg_chart(rp.report_dir() / "eer_vs_sparsity.svg", "Verification EER vs pruning",
                        "pruned filters (%)", "EER (%)", series);
        // the same series against learnables
        std::vector<Series> series_l;
        Series base_l{"no retrain", {}, {}};
        for (const auto& r : rows) {
            if (std::isnan(r.eer1)) continue;
            base_l.x.push_back(r.learnables);
            base_l.y.push_back(r.eer1 * 100.0);
        }
        series_l.push_back(std::move(base_l));
        for (auto& [tag, pts] : retrained_eer1) {
            Series s{"retrain lr " + tag, {}, {}};
            for (const auto& [iter, eer] : pts) {
                for (const auto& r : rows)
                    if (r.iteration == iter) {
                        s.x.push_back(r.learnables);
                        s.y.push_back(eer * 100.0);
                    }
            }
            series_l.push_back(std::move(s));
        }
        write_svg_chart(rp.report_dir() / "eer_vs_learnables.svg", "EER vs learnables",
                        "learnables", "EER (%)", series_l);
    }

    // learnables and embedding size over pruning
    {
        Series lear{"learnables", {}, {}};
        Series emb{"embedding size", {}, {}};
        for (const auto& r : rows) {
            lear.x.push_back(r.pruned_fraction * 100.0);
            lear.y.push_back(r.learnables);
            emb.x.push_back(r.pruned_fraction * 100.0);
            emb.y.push_back(r.embedding);
        }
        write_svg_chart(rp.report_dir() / "learnables_vs_sparsity.svg",
                        "Learnables vs pruning", "pruned filters (%)", "learnables", {lear});
        write_svg_chart(rp.report_dir() / "embedding_vs_sparsity.svg",
                        "Embedding size vs pruning", "pruned filters (%)", "embedding size",
                        {emb});
    }

    // filters per layer at a few pruning levels
    {
        std::ifstream f(rp.filters_per_layer());
        std::string line;
        std::getline(f, line);  // hash
        std::getline(f, line);  // header
        std::vector<std::vector<int>> matrix;
        std::vector<int> iters;
        while (std::getline(f, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::vector<int> row;
            bool first = true;
            while (std::getline(ss, cell, ',')) {
                if (first) {
                    iters.push_back(std::stoi(cell));
                    first = false;
                } else {
                    row.push_back(std::stoi(cell));
                }
            }
            matrix.push_back(std::move(row));
        }
        if (!matrix.empty()) {
            std::vector<Series> series;
            std::vector<std::size_t> picks = {0, matrix.size() / 2, matrix.size() - 1};
            for (std::size_t p : picks) {
                Series s{"iteration " + std::to_string(iters[p]), {}, {}};
                for (std::size_t l = 0; l < matrix[p].size(); ++l) {
                    s.x.push_back(static_cast<double>(l));
                    s.y.push_back(matrix[p][l]);
                }
                series.push_back(std::move(s));
            }
            write_svg_chart(rp.report_dir() / "filters_per_layer.svg", "Filters per layer",
                            "layer index", "filters", series);
        }
    }

    // PSNR histogram when the explain stage ran
    auto psnr_path = rp.explain_dir() / "psnr_histogram.csv";
    if (std::filesystem::exists(psnr_path)) {
        std::ifstream f(psnr_path);
        std::string line;
        Series s{"psnr", {}, {}};
        while (std::getline(f, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("bin_left", 0) == 0) continue;
            double l = 0, rgt = 0;
            long long c = 0;
            if (std::sscanf(line.c_str(), "%lf,%lf,%lld", &l, &rgt, &c) == 3) {
                s.x.push_back((l + rgt) / 2.0);
                s.y.push_back(static_cast<double>(c));
            }
        }
        write_svg_chart(rp.report_dir() / "psnr_histogram.svg", "Heatmap PSNR histogram",
                        "PSNR (dB)", "images", {s});
    }

    // consolidated summary
    {
        std::ofstream f(rp.report_dir() / "summary.csv", std::ios::trunc);
        f << hash_header(cfg.hash);
        f << "iteration,pruned_fraction,learnables,embedding_size,eer_1to1,eer_5to5";
        for (const auto& [tag, pts] : retrained_eer1) f << ",eer_1to1_retrain_lr" << tag;
        f << '\n';
        for (const auto& r : rows) {
            f << r.iteration << ',' << format_double(r.pruned_fraction) << ','
              << format_double(r.learnables) << ',' << format_double(r.embedding) << ',';
            if (!std::isnan(r.eer1)) f << format_double(r.eer1);
            f << ',';
            if (!std::isnan(r.eer5)) f << format_double(r.eer5);
            for (const auto& [tag, pts] : retrained_eer1) {
                f << ',';
                for (const auto& [iter, eer] : pts)
                    if (iter == r.iteration) f << format_double(eer);
            }
            f << '\n';
        }
    }
}

}  // namespace tp
