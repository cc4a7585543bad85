// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#include "tp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace tp {

void SyntheticIdentityConfig::validate() const {
    if (identities < 2) throw ConfigError("data: need at least 2 identities");
    if (poses < 1) throw ConfigError("data: pose set must be nonempty");
    if (images_per_identity < poses || images_per_identity % poses != 0) {
        throw ConfigError("data: images_per_identity must be a positive multiple of poses");
    }
    if (image_size < 8) throw ConfigError("data: image_size too small");
    if (noise_level < 0.0) throw ConfigError("data: noise_level must be >= 0");
}

namespace {

struct IdentityPattern {
    // sinusoid mixture plus gaussian blobs, rendered on demand
    struct Wave {
        double fx, fy, phase, amp;
    };
    struct Blob {
        double cx, cy, sigma, amp;
    };
    std::vector<Wave> waves;
    std::vector<Blob> blobs;

    double eval(double x, double y, int size) const {
        double s = static_cast<double>(size);
        double v = 0.0;
        for (const auto& w : waves)
            v += w.amp * std::sin(6.283185307179586 * (w.fx * x + w.fy * y) / s + w.phase);
        for (const auto& b : blobs) {
            double dx = x - b.cx, dy = y - b.cy;
            v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
        }
        return 0.5 + v / 4.0;  // amplitudes bounded so values stay near [0,1]
    }
};

IdentityPattern draw_pattern(Rng& rng, int size) {
    IdentityPattern p;
    for (int k = 0; k < 4; ++k) {
        IdentityPattern::Wave w;
        w.fx = rng.uniform(0.5, 4.0);
        w.fy = rng.uniform(0.5, 4.0);
        w.phase = rng.uniform(0.0, 6.283185307179586);
        w.amp = rng.uniform(0.2, 0.45);
        p.waves.push_back(w);
    }
    for (int k = 0; k < 3; ++k) {
        IdentityPattern::Blob b;
        b.cx = rng.uniform(0.2, 0.8) * size;
        b.cy = rng.uniform(0.2, 0.8) * size;
        b.sigma = rng.uniform(0.08, 0.2) * size;
        b.amp = rng.uniform(-0.5, 0.5);
        p.blobs.push_back(b);
    }
    return p;
}

// horizontal shear + shift per pose, sampled from the analytic pattern
// (frontal, three-quarter, profile)
void pose_params(int pose, double& shear, double& shift) {
    static const double kShear[] = {0.0, 0.22, 0.44};
    static const double kShift[] = {0.0, 1.5, 3.0};
    int p = pose % 3;
    shear = kShear[p];
    shift = kShift[p];
}

}  // namespace

Dataset generate_synthetic_identities(const SyntheticIdentityConfig& cfg) {
    cfg.validate();
    Dataset ds;
    ds.class_count = cfg.identities;
    ds.poses = cfg.poses;
    ds.images_per_pose = cfg.images_per_identity / cfg.poses;
    ds.height = ds.width = cfg.image_size;
    ds.channels = 1;
    int size = cfg.image_size;
    double cy = (size - 1) / 2.0;
    for (int id = 0; id < cfg.identities; ++id) {
        Rng prng(derive_seed(cfg.seed, "identity", static_cast<std::uint64_t>(id)));
        IdentityPattern pattern = draw_pattern(prng, size);
        for (int pose = 0; pose < cfg.poses; ++pose) {
            double shear, shift;
            pose_params(pose, shear, shift);
            for (int j = 0; j < ds.images_per_pose; ++j) {
                auto img = Tensor::zeros({1, size, size});
                for (int y = 0; y < size; ++y) {
                    for (int x = 0; x < size; ++x) {
                        double sx = x + shear * (y - cy) + shift;
                        img->data[static_cast<std::size_t>(y) * size + x] =
                            pattern.eval(sx, y, size);
                    }
                }
                if (cfg.noise_level > 0.0) {
                    Rng nrng(derive_seed(cfg.seed, "noise",
                                         (static_cast<std::uint64_t>(id) << 20) ^
                                             (static_cast<std::uint64_t>(pose) << 10) ^
                                             static_cast<std::uint64_t>(j)));
                    for (auto& v : img->data) v += nrng.normal(0.0, cfg.noise_level);
                }
                ds.samples.push_back({img, id, pose, j});
            }
        }
    }
    return ds;
}

void split_train_val(Dataset& ds, double val_fraction) {
    if (val_fraction < 0.0 || val_fraction >= 1.0)
        throw ConfigError("data: val fraction must be in [0,1)");
    ds.train_indices.clear();
    ds.val_indices.clear();
    std::vector<std::vector<int>> per_class(static_cast<std::size_t>(ds.class_count));
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        per_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(static_cast<int>(i));
    for (auto& members : per_class) {
        int n = static_cast<int>(members.size());
        int v = static_cast<int>(std::floor(val_fraction * n));
        if (v == 0 && n > 1 && val_fraction > 0.0) v = 1;
        std::vector<char> is_val(static_cast<std::size_t>(n), 0);
        for (int t = 0; t < v; ++t) {
            // evenly spread across the class (and thus across poses)
            int pick = static_cast<int>((static_cast<std::int64_t>(t) * n) / v);
            while (is_val[static_cast<std::size_t>(pick)]) pick = (pick + 1) % n;
            is_val[static_cast<std::size_t>(pick)] = 1;
        }
        for (int k = 0; k < n; ++k) {
            (is_val[static_cast<std::size_t>(k)] ? ds.val_indices : ds.train_indices)
                .push_back(members[static_cast<std::size_t>(k)]);
        }
    }
}

namespace {

void check_image(const char* op, const TensorPtr& image) {
    if (!image || image->rank() != 3)
        throw ShapeError(std::string(op) + ": expected [C,H,W] image");
}

}  // namespace

TensorPtr resize_short_side(const TensorPtr& image, int target) {
    check_image("resize_short_side", image);
    if (target < 1) throw ShapeError("resize_short_side: target must be positive");
    int c = image->dim(0), h = image->dim(1), w = image->dim(2);
    int short_side = std::min(h, w);
    if (short_side == target) return image->clone();
    double s = static_cast<double>(target) / short_side;
    int oh = h == short_side ? target : std::max(1, static_cast<int>(std::lround(h * s)));
    int ow = w == short_side ? target : std::max(1, static_cast<int>(std::lround(w * s)));
    auto out = Tensor::zeros({c, oh, ow});
    for (int ch = 0; ch < c; ++ch) {
        const double* src = image->data.data() + static_cast<std::int64_t>(ch) * h * w;
        double* dst = out->data.data() + static_cast<std::int64_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            double fy = (y + 0.5) * h / oh - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double wy = fy - y0;
            int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
            for (int x = 0; x < ow; ++x) {
                double fx = (x + 0.5) * w / ow - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double wx = fx - x0;
                int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
                double v00 = src[y0c * w + x0c], v01 = src[y0c * w + x1c];
                double v10 = src[y1c * w + x0c], v11 = src[y1c * w + x1c];
                dst[y * ow + x] = (1 - wy) * ((1 - wx) * v00 + wx * v01) +
                                  wy * ((1 - wx) * v10 + wx * v11);
            }
        }
    }
    return out;
}

namespace {

TensorPtr crop_at(const TensorPtr& image, int size, int oy, int ox) {
    int c = image->dim(0), h = image->dim(1), w = image->dim(2);
    if (size > h || size > w)
        throw ShapeError("crop: size " + std::to_string(size) + " exceeds image " +
                         image->shape_str());
    auto out = Tensor::zeros({c, size, size});
    for (int ch = 0; ch < c; ++ch) {
        const double* src = image->data.data() + static_cast<std::int64_t>(ch) * h * w;
        double* dst = out->data.data() + static_cast<std::int64_t>(ch) * size * size;
        for (int y = 0; y < size; ++y)
            std::memcpy(dst + static_cast<std::int64_t>(y) * size,
                        src + static_cast<std::int64_t>(oy + y) * w + ox,
                        static_cast<std::size_t>(size) * sizeof(double));
    }
    return out;
}

}  // namespace

TensorPtr centre_crop(const TensorPtr& image, int size) {
    check_image("centre_crop", image);
    int h = image->dim(1), w = image->dim(2);
    return crop_at(image, size, (h - size) / 2, (w - size) / 2);
}

TensorPtr hflip(const TensorPtr& image) {
    check_image("hflip", image);
    int c = image->dim(0), h = image->dim(1), w = image->dim(2);
    auto out = Tensor::zeros(image->shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            const double* src =
                image->data.data() + (static_cast<std::int64_t>(ch) * h + y) * w;
            double* dst = out->data.data() + (static_cast<std::int64_t>(ch) * h + y) * w;
            for (int x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
        }
    return out;
}

TensorPtr augment(const TensorPtr& image, int resize_target, int crop, Rng& rng) {
    auto resized = resize_short_side(image, resize_target);
    int h = resized->dim(1), w = resized->dim(2);
    int oy = static_cast<int>(rng.uniform_int(0, h - crop));
    int ox = static_cast<int>(rng.uniform_int(0, w - crop));
    auto cropped = crop_at(resized, crop, oy, ox);
    if (rng.uniform() < 0.5) return hflip(cropped);
    return cropped;
}

TensorPtr eval_preprocess(const TensorPtr& image, int resize_target, int crop) {
    return centre_crop(resize_short_side(image, resize_target), crop);
}

TensorPtr batch_images(const std::vector<TensorPtr>& images) {
    if (images.empty()) throw ShapeError("batch_images: empty batch");
    const auto& first = images.front();
    check_image("batch_images", first);
    int c = first->dim(0), h = first->dim(1), w = first->dim(2);
    auto out = Tensor::zeros({static_cast<int>(images.size()), c, h, w});
    std::int64_t per = static_cast<std::int64_t>(c) * h * w;
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (images[i]->shape != first->shape)
            throw ShapeError("batch_images: inconsistent image shapes");
        std::memcpy(out->data.data() + static_cast<std::int64_t>(i) * per,
                    images[i]->data.data(), static_cast<std::size_t>(per) * sizeof(double));
    }
    return out;
}

// dataset file: magic, version, config hash, dims, then per sample
// label/pose/pose_index and float32 pixels; trailing fnv checksum
namespace {
constexpr char kDataMagic[4] = {'T', 'P', 'D', 'S'};
constexpr std::uint32_t kDataVersion = 1;
}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& ds,
                  std::uint64_t config_hash) {
    std::vector<std::uint8_t> bytes;
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    auto u64 = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    bytes.insert(bytes.end(), kDataMagic, kDataMagic + 4);
    u32(kDataVersion);
    u64(config_hash);
    u32(static_cast<std::uint32_t>(ds.class_count));
    u32(static_cast<std::uint32_t>(ds.poses));
    u32(static_cast<std::uint32_t>(ds.images_per_pose));
    u32(static_cast<std::uint32_t>(ds.channels));
    u32(static_cast<std::uint32_t>(ds.height));
    u32(static_cast<std::uint32_t>(ds.width));
    u32(static_cast<std::uint32_t>(ds.samples.size()));
    for (const auto& s : ds.samples) {
        u32(static_cast<std::uint32_t>(s.label));
        u32(static_cast<std::uint32_t>(s.pose));
        u32(static_cast<std::uint32_t>(s.pose_index));
        for (double v : s.image->data) {
            float f = static_cast<float>(v);
            std::uint32_t b;
            std::memcpy(&b, &f, 4);
            u32(b);
        }
    }
    u64(fnv1a_bytes(bytes.data(), bytes.size(), 14695981039346656037ULL));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: '" + path.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& path, std::uint64_t* config_hash) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("dataset file missing: '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 24 || std::memcmp(bytes.data(), kDataMagic, 4) != 0)
        throw IoError("dataset file: bad header");
    std::uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + static_cast<std::size_t>(i)])
                  << (8 * i);
    if (stored != fnv1a_bytes(bytes.data(), bytes.size() - 8, 14695981039346656037ULL))
        throw IoError("dataset file: checksum failure");
    std::size_t pos = 4;
    auto u32 = [&]() {
        if (pos + 4 > bytes.size()) throw IoError("dataset file: truncated");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    };
    auto u64 = [&]() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    };
    if (u32() != kDataVersion) throw IoError("dataset file: unsupported version");
    std::uint64_t hash = u64();
    if (config_hash) *config_hash = hash;
    Dataset ds;
    ds.class_count = static_cast<int>(u32());
    ds.poses = static_cast<int>(u32());
    ds.images_per_pose = static_cast<int>(u32());
    ds.channels = static_cast<int>(u32());
    ds.height = static_cast<int>(u32());
    ds.width = static_cast<int>(u32());
    auto n = u32();
    for (std::uint32_t i = 0; i < n; ++i) {
        Sample s;
        s.label = static_cast<int>(u32());
        s.pose = static_cast<int>(u32());
        s.pose_index = static_cast<int>(u32());
        s.image = Tensor::zeros({ds.channels, ds.height, ds.width});
        for (auto& v : s.image->data) {
            std::uint32_t b = u32();
            float fv;
            std::memcpy(&fv, &b, 4);
            v = static_cast<double>(fv);
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace tp
