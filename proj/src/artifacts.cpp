// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace tp {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    return f;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string hash_header(std::uint64_t config_hash) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "# config_hash=0x%016llx\n",
                  static_cast<unsigned long long>(config_hash));
    return buf;
}

std::uint64_t read_hash_header(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("artifact missing: '" + path.string() + "'");
    std::string line;
    std::getline(f, line);
    unsigned long long h = 0;
    if (std::sscanf(line.c_str(), "# config_hash=0x%llx", &h) != 1) {
        throw IoError("artifact '" + path.string() + "' has no config_hash header");
    }
    return static_cast<std::uint64_t>(h);
}

void write_train_history_csv(const std::filesystem::path& path,
                             const std::vector<EpochRecord>& history,
                             std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "epoch,train_loss,val_loss,lr\n";
    for (const auto& r : history) {
        f << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_loss)
          << ',' << format_double(r.lr) << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const PruneTrajectory& traj,
                          std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "iteration,pruned_fraction,learnables,embedding_size,eer_1to1,eer_5to5\n";
    for (const auto& r : traj.records) {
        f << r.iteration << ',' << format_double(r.pruned_fraction) << ',' << r.learnables << ','
          << r.embedding_size << ',';
        if (r.eer_1to1) f << format_double(*r.eer_1to1);
        f << ',';
        if (r.eer_5to5) f << format_double(*r.eer_5to5);
        f << '\n';
    }
}

void write_filters_per_layer_csv(const std::filesystem::path& path, const PruneTrajectory& traj,
                                 std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "iteration";
    for (const auto& id : traj.layer_ids) f << ',' << id;
    f << '\n';
    for (const auto& r : traj.records) {
        f << r.iteration;
        for (int c : r.filters_per_layer) f << ',' << c;
        f << '\n';
    }
}

void write_removed_groups_csv(const std::filesystem::path& path, const PruneTrajectory& traj,
                              std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "iteration,group_id,first_node,origin_width,primary_filters,score\n";
    for (const auto& r : traj.records) {
        for (const auto& g : r.removed) {
            f << r.iteration << ',' << g.group_id << ',' << g.first_node << ','
              << g.origin_width << ',' << g.primary_filters << ',' << format_double(g.score)
              << '\n';
        }
    }
}

void write_scores_csv(const std::filesystem::path& path, const ScoreSet& scores,
                      std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "subject_a,subject_b,pose_a,pose_b,template_size,score,label\n";
    for (const auto& r : scores.records) {
        f << r.subject_a << ',' << r.subject_b << ',' << r.pose_a << ',' << r.pose_b << ','
          << r.template_size << ',' << format_double(r.score) << ','
          << (r.genuine ? "genuine" : "impostor") << '\n';
    }
}

void write_eer_report_csv(const std::filesystem::path& path,
                          const std::vector<EerReportRow>& rows, std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "template_size,iteration,eer,threshold\n";
    for (const auto& r : rows) {
        f << r.template_size << ',' << r.iteration << ',' << format_double(r.eer) << ','
          << format_double(r.threshold) << '\n';
    }
}

void write_heatmap_csv(const std::filesystem::path& path, const Heatmap& map,
                       std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "# source_image=" << map.source_image << " source_network=" << map.source_network
      << " fallback=" << (map.used_fallback ? 1 : 0) << '\n';
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            if (c) f << ',';
            f << format_double(map.at(r, c));
        }
        f << '\n';
    }
}

void write_psnr_histogram_csv(const std::filesystem::path& path, const PsnrHistogram& hist,
                              double eer_a, double eer_b, std::uint64_t config_hash) {
    auto f = open_out(path);
    f << hash_header(config_hash);
    f << "# eer_a=" << format_double(eer_a) << " eer_b=" << format_double(eer_b) << '\n';
    f << "bin_left,bin_right,count\n";
    double width = (hist.hi - hist.lo) / hist.bins;
    for (int b = 0; b < hist.bins; ++b) {
        f << format_double(hist.lo + b * width) << ',' << format_double(hist.lo + (b + 1) * width)
          << ',' << hist.counts[static_cast<std::size_t>(b)] << '\n';
    }
}

void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<Series>& series) {
    const int width = 720, height = 480;
    const int ml = 70, mr = 130, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    auto px = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    };
    auto py = [&](double y) {
        return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
    };
    static const char* kColors[] = {"#1f77b4", "#d62728", "#ff7f0e", "#2ca02c",
                                    "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
    auto f = open_out(path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
    f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    f << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
    // axes
    f << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << height - mb << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double xv = xmin + (xmax - xmin) * t / 4.0;
        double yv = ymin + (ymax - ymin) * t / 4.0;
        f << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
          << "\" text-anchor=\"middle\" font-size=\"11\">" << format_double(xv) << "</text>\n";
        f << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
          << "\" text-anchor=\"end\" font-size=\"11\">" << format_double(yv) << "</text>\n";
    }
    f << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    f << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % 8];
        f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            f << format_double(px(s.x[i])) << ',' << format_double(py(s.y[i])) << ' ';
        }
        f << "\"/>\n";
        int ly = mt + 16 + static_cast<int>(si) * 18;
        f << "<line x1=\"" << width - mr + 10 << "\" y1=\"" << ly << "\" x2=\""
          << width - mr + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
        f << "<text x=\"" << width - mr + 34 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
          << s.label << "</text>\n";
    }
    f << "</svg>\n";
}

}  // namespace tp
