#include "rsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rsim/errors.hpp"
#include "rsim/image_io.hpp"
#include "rsim/rng.hpp"

namespace rsim {

std::vector<std::string> Dataset::labels() const {
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.label);
    return out;
}

Dataset scan_directory(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root))
        throw IoError(root.string() + " is not a directory");

    std::vector<std::filesystem::path> class_dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());

    Dataset ds;
    ds.root = root;
    for (const auto& dir : class_dirs) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.is_regular_file()) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            if (f.extension() == ".json") continue; // sidecar metadata
            if (!looks_like_png(f)) {
                std::fprintf(stderr, "warning: skipping non-image file %s\n", f.string().c_str());
                continue;
            }
            const std::string cls = dir.filename().string();
            ds.items.push_back({cls + "/" + f.filename().string(), cls, f});
        }
    }
    if (ds.items.empty()) throw IoError("no images found under " + root.string());
    return ds;
}

Tensor load_image(const DatasetItem& item, int h, int w) {
    return resize_bilinear(read_png(item.path), h, w);
}

void SyntheticSpec::validate() const {
    const int available = static_cast<int>(synthetic_class_names().size());
    if (classes < 1 || classes > available)
        throw ValueError("synthetic: classes must be in [1," + std::to_string(available) + "]");
    if (images_per_class < 1) throw ValueError("synthetic: images_per_class must be >= 1");
    if (image_size < 8) throw ValueError("synthetic: image_size must be >= 8");
    if (noise < 0.0 || jitter < 0.0) throw ValueError("synthetic: noise and jitter must be >= 0");
}

const std::vector<std::string>& synthetic_class_names() {
    static const std::vector<std::string> names = {"disk",   "square",  "cross",   "stripes_h",
                                                   "stripes_v", "ring", "checker", "blob"};
    return names;
}

namespace {

struct Rgb {
    double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h); // wrap hue into [0,1)
    const double f = h * 6.0;
    const int sector = static_cast<int>(f) % 6;
    const double frac = f - std::floor(f);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * frac);
    const double t = v * (1.0 - s * (1.0 - frac));
    switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
    }
}

// Per-image draw of all jittered rendering parameters. Draw order is fixed;
// adding draws would change every seeded corpus, so new parameters go last.
struct ShapeParams {
    double hue, sat, val;
    Rgb fg, bg;
    double cx, cy, radius, rot;
    double freq, phase;
    double blob_ox[3], blob_oy[3], blob_r[3];
};

ShapeParams draw_params(int class_idx, const SyntheticSpec& spec, Rng& rng) {
    static const double base_hue[8] = {0.00, 0.10, 0.33, 0.50, 0.62, 0.80, 0.17, 0.90};
    const double j = spec.jitter;
    ShapeParams p{};
    p.hue = base_hue[class_idx] + 0.035 * rng.uniform(-1.0, 1.0);
    p.sat = 0.8 + 0.15 * rng.uniform(-1.0, 1.0);
    p.val = 0.85 + 0.1 * rng.uniform(-1.0, 1.0);
    p.fg = hsv_to_rgb(p.hue, p.sat, p.val);
    p.bg = hsv_to_rgb(p.hue + 0.5, 0.15, 0.13 + 0.05 * rng.uniform(-1.0, 1.0));
    p.cx = 0.5 + 0.16 * j * rng.uniform(-1.0, 1.0);
    p.cy = 0.5 + 0.16 * j * rng.uniform(-1.0, 1.0);
    p.radius = 0.26 + 0.08 * j * rng.uniform(-1.0, 1.0);
    p.rot = 0.5 * j * rng.uniform(-1.0, 1.0);
    p.freq = 3.5 + 1.5 * rng.uniform();
    p.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    for (int i = 0; i < 3; ++i) {
        p.blob_ox[i] = 0.55 * p.radius * rng.uniform(-1.0, 1.0);
        p.blob_oy[i] = 0.55 * p.radius * rng.uniform(-1.0, 1.0);
        p.blob_r[i] = p.radius * (0.5 + 0.25 * rng.uniform());
    }
    return p;
}

// Shape coverage test at normalized image coordinates (x,y) in [0,1).
bool covered(int class_idx, const ShapeParams& p, double x, double y) {
    const double c = std::cos(p.rot), s = std::sin(p.rot);
    // coords relative to the shape center, rotated
    const double u0 = x - p.cx, v0 = y - p.cy;
    const double u = c * u0 + s * v0;
    const double v = -s * u0 + c * v0;
    // coords relative to the image center, rotated (full-image patterns)
    const double U0 = x - 0.5, V0 = y - 0.5;
    const double U = c * U0 + s * V0;
    const double V = -s * U0 + c * V0;
    const double r = p.radius;
    switch (class_idx) {
    case 0: // disk
        return u0 * u0 + v0 * v0 <= r * r;
    case 1: // square
        return std::max(std::abs(u), std::abs(v)) <= r * 0.85;
    case 2: { // cross
        const double arm = 0.3 * r;
        return (std::abs(u) <= arm && std::abs(v) <= r) || (std::abs(v) <= arm && std::abs(u) <= r);
    }
    case 3: // horizontal stripes
        return std::sin(2.0 * 3.14159265358979323846 * p.freq * (V + 0.5) + p.phase) > 0.0;
    case 4: // vertical stripes
        return std::sin(2.0 * 3.14159265358979323846 * p.freq * (U + 0.5) + p.phase) > 0.0;
    case 5: { // ring
        const double d2 = u0 * u0 + v0 * v0;
        const double rin = 0.55 * r;
        return d2 >= rin * rin && d2 <= r * r;
    }
    case 6: { // checkerboard
        const double cells = 2.0 * p.freq;
        const auto ix = static_cast<long long>(std::floor((U + 0.5) * cells + p.phase * 0.1));
        const auto iy = static_cast<long long>(std::floor((V + 0.5) * cells));
        return ((ix + iy) & 1LL) == 0LL;
    }
    default: { // blob
        for (int i = 0; i < 3; ++i) {
            const double du = u0 - p.blob_ox[i], dv = v0 - p.blob_oy[i];
            if (du * du + dv * dv <= p.blob_r[i] * p.blob_r[i]) return true;
        }
        return false;
    }
    }
}

Tensor render_image(int class_idx, const SyntheticSpec& spec, Rng& rng) {
    const ShapeParams p = draw_params(class_idx, spec, rng);
    const int n = spec.image_size;
    constexpr int kSub = 4; // 4x4 supersampling per pixel
    Tensor img({n, n, 3});
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            double cov = 0.0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double px = (x + (sx + 0.5) / kSub) / n;
                    const double py = (y + (sy + 0.5) / kSub) / n;
                    if (covered(class_idx, p, px, py)) cov += 1.0;
                }
            cov /= kSub * kSub;
            img.at3(y, x, 0) = p.bg.r + cov * (p.fg.r - p.bg.r);
            img.at3(y, x, 1) = p.bg.g + cov * (p.fg.g - p.bg.g);
            img.at3(y, x, 2) = p.bg.b + cov * (p.fg.b - p.bg.b);
        }
    }
    if (spec.noise > 0.0)
        for (auto& v : img.data) v = std::clamp(v + rng.normal(0.0, spec.noise), 0.0, 1.0);
    return img;
}

} // namespace

Dataset generate_synthetic(const std::filesystem::path& root, const SyntheticSpec& spec) {
    spec.validate();
    const auto& names = synthetic_class_names();

    nlohmann::ordered_json manifest;
    manifest["generator"] = "synthetic-shapes";
    manifest["seed"] = spec.seed;
    manifest["image_size"] = spec.image_size;
    manifest["images_per_class"] = spec.images_per_class;
    manifest["noise"] = spec.noise;
    manifest["jitter"] = spec.jitter;
    manifest["classes"] = nlohmann::ordered_json::array();

    std::filesystem::create_directories(root);
    for (int c = 0; c < spec.classes; ++c) {
        const auto dir = root / names[static_cast<std::size_t>(c)];
        std::filesystem::create_directories(dir);
        nlohmann::ordered_json cls;
        cls["name"] = names[static_cast<std::size_t>(c)];
        cls["images"] = nlohmann::ordered_json::array();
        for (int i = 0; i < spec.images_per_class; ++i) {
            Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)));
            const Tensor img = render_image(c, spec, rng);
            char name[32];
            std::snprintf(name, sizeof name, "img_%03d.png", i);
            write_png(dir / name, img);
            cls["images"].push_back(name);
        }
        manifest["classes"].push_back(std::move(cls));
    }

    std::ofstream mf(root / "manifest.json");
    if (!mf) throw IoError("cannot write manifest under " + root.string());
    mf << manifest.dump(2) << '\n';
    mf.close();

    return scan_directory(root);
}

} // namespace rsim
