// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/geometry.hpp"
#include "depthdiff/io/image_io.hpp"

namespace depthdiff::data {
namespace {

struct Vec3 {
    double x = 0, y = 0, z = 0;
};
Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(Vec3 a) {
    const double n = norm(a);
    return {a.x / n, a.y / n, a.z / n};
}

struct Solid {
    enum Kind { Sphere, Box, Cylinder } kind;
    bool transparent = false;
    Vec3 center;       // sphere center / box center / cylinder base
    Vec3 axis;         // cylinder axis (unit, toward camera side)
    double r = 0;      // sphere or cylinder radius
    double height = 0; // cylinder height
    Vec3 half;         // box half extents
    double albedo[3] = {0.5, 0.5, 0.5};
};

constexpr double kInf = 1e30;

// Ray P(z) = z * dir with dir = ((x-cx)/fx, (y-cy)/fy, 1).
double hit_sphere(Vec3 dir, const Solid& s) {
    const double a = dot(dir, dir);
    const double b = -2.0 * dot(dir, s.center);
    const double c = dot(s.center, s.center) - s.r * s.r;
    const double disc = b * b - 4 * a * c;
    if (disc < 0) return kInf;
    const double sq = std::sqrt(disc);
    const double z1 = (-b - sq) / (2 * a);
    const double z2 = (-b + sq) / (2 * a);
    if (z1 > 1e-6) return z1;
    if (z2 > 1e-6) return z2;
    return kInf;
}

double hit_box(Vec3 dir, const Solid& s) {
    double tmin = 1e-6, tmax = kInf;
    const double d[3] = {dir.x, dir.y, dir.z};
    const double lo[3] = {s.center.x - s.half.x, s.center.y - s.half.y, s.center.z - s.half.z};
    const double hi[3] = {s.center.x + s.half.x, s.center.y + s.half.y, s.center.z + s.half.z};
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-12) {
            if (0.0 < lo[i] || 0.0 > hi[i]) return kInf;  // ray origin is 0
            continue;
        }
        double t1 = lo[i] / d[i];
        double t2 = hi[i] / d[i];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return kInf;
    }
    return tmin;
}

double hit_cylinder(Vec3 dir, const Solid& s) {
    const Vec3 a = s.axis;
    const Vec3 dp = dir - dot(dir, a) * a;
    const Vec3 bp = s.center - dot(s.center, a) * a;
    const double A = dot(dp, dp);
    double best = kInf;
    if (A > 1e-12) {
        const double B = -2.0 * dot(dp, bp);
        const double C = dot(bp, bp) - s.r * s.r;
        const double disc = B * B - 4 * A * C;
        if (disc >= 0) {
            const double sq = std::sqrt(disc);
            for (double z : {(-B - sq) / (2 * A), (-B + sq) / (2 * A)}) {
                if (z <= 1e-6) continue;
                const double h = dot(z * dir - s.center, a);
                if (h >= 0.0 && h <= s.height) {
                    best = std::min(best, z);
                    break;
                }
            }
        }
    }
    // Top cap disk.
    const double denom = dot(a, dir);
    if (std::abs(denom) > 1e-12) {
        const double z = (dot(a, s.center) + s.height) / denom;
        if (z > 1e-6) {
            const Vec3 p = z * dir - (s.center + s.height * a);
            if (dot(p, p) - dot(p, a) * dot(p, a) <= s.r * s.r) best = std::min(best, z);
        }
    }
    return best;
}

double hit_solid(Vec3 dir, const Solid& s) {
    switch (s.kind) {
        case Solid::Sphere: return hit_sphere(dir, s);
        case Solid::Box: return hit_box(dir, s);
        case Solid::Cylinder: return hit_cylinder(dir, s);
    }
    return kInf;
}

std::string meta_text(const SceneSample& s, uint64_t hash_value) {
    std::ostringstream os;
    os.precision(17);
    os << "id = " << s.id << "\n";
    os << "fx = " << s.intrinsics.fx << "\n";
    os << "fy = " << s.intrinsics.fy << "\n";
    os << "cx = " << s.intrinsics.cx << "\n";
    os << "cy = " << s.intrinsics.cy << "\n";
    os << "depth_scale = 0.001\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_value));
    os << "spec_hash = " << buf << "\n";
    return os.str();
}

std::map<std::string, std::string> parse_meta(const std::filesystem::path& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    if (!in) return kv;
    std::string line;
    while (std::getline(in, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const size_t a = s.find_first_not_of(" \t\r");
            const size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace

SynthSpec SynthSpec::from_config(const Config& cfg) {
    SynthSpec s;
    s.width = cfg.data_width;
    s.height = cfg.data_height;
    s.objects_min = cfg.data_objects_min;
    s.objects_max = cfg.data_objects_max;
    s.table_depth_min = cfg.data_table_depth_min;
    s.table_depth_max = cfg.data_table_depth_max;
    s.hole_prob = cfg.data_hole_prob;
    s.noise_sigma = cfg.data_noise_sigma;
    s.leak_sigma = cfg.data_leak_sigma;
    s.focal = cfg.data_focal;
    s.boundary_threshold = cfg.geo_boundary_threshold;
    return s;
}

void SynthSpec::validate() const {
    if (width % 4 != 0 || height % 4 != 0)
        throw invalid_argument("SynthSpec: resolution must be divisible by 4, got " +
                               std::to_string(width) + "x" + std::to_string(height));
    if (width < 8 || height < 8) throw invalid_argument("SynthSpec: resolution too small");
    if (objects_min < 0 || objects_max < objects_min)
        throw invalid_argument("SynthSpec: bad object count range");
    if (!(table_depth_min > 0.0 && table_depth_max > table_depth_min))
        throw invalid_argument("SynthSpec: degenerate depth range");
    if (hole_prob < 0.0 || hole_prob > 1.0)
        throw invalid_argument("SynthSpec: hole_prob outside [0,1]");
    if (!(focal > 0.0)) throw invalid_argument("SynthSpec: focal must be positive");
}

uint64_t spec_hash(const SynthSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    os << spec.width << "|" << spec.height << "|" << spec.objects_min << "|"
       << spec.objects_max << "|" << spec.table_depth_min << "|" << spec.table_depth_max
       << "|" << spec.hole_prob << "|" << spec.noise_sigma << "|" << spec.leak_sigma << "|"
       << spec.focal << "|" << spec.boundary_threshold;
    const std::string s = os.str();
    return Rng::hash_bytes(s.data(), s.size());
}

SceneSample generate_scene(const SynthSpec& spec, Rng& rng, const std::string& id) {
    spec.validate();
    const int h = spec.height, w = spec.width;

    SceneSample out;
    out.id = id;
    out.intrinsics = {spec.focal, spec.focal, (w - 1) / 2.0, (h - 1) / 2.0};
    const CameraIntrinsics& k = out.intrinsics;

    // Tilted table plane through the optical axis at a random depth.
    const double z_table = rng.uniform(spec.table_depth_min, spec.table_depth_max);
    const Vec3 plane_n = normalized({rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), -1.0});
    const Vec3 plane_p0 = {0.0, 0.0, z_table};
    const double plane_d = dot(plane_n, plane_p0);
    auto table_depth = [&](Vec3 dir) {
        const double denom = dot(plane_n, dir);
        return denom < -1e-9 ? plane_d / denom : kInf;
    };

    // Solids resting on the table, toward the camera.
    const int count = static_cast<int>(
        rng.uniform_int(spec.objects_min, spec.objects_max));
    std::vector<Solid> solids;
    for (int i = 0; i < count; ++i) {
        Solid s;
        const double kind_draw = rng.uniform();
        s.kind = kind_draw < 0.34 ? Solid::Sphere
                                  : (kind_draw < 0.67 ? Solid::Box : Solid::Cylinder);
        s.transparent = rng.uniform() < 0.6;
        for (double& a : s.albedo) a = rng.uniform(0.2, 0.9);

        // Anchor point on the table via a random interior pixel.
        const double px = rng.uniform(0.2 * w, 0.8 * w);
        const double py = rng.uniform(0.2 * h, 0.8 * h);
        const Vec3 dir = {(px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0};
        const double zt = table_depth(dir);
        if (zt >= kInf) continue;
        const Vec3 anchor = zt * dir;

        switch (s.kind) {
            case Solid::Sphere:
                s.r = rng.uniform(0.05, 0.11);
                s.center = anchor + s.r * plane_n;  // plane_n points toward the camera
                break;
            case Solid::Box:
                s.half = {rng.uniform(0.03, 0.08), rng.uniform(0.03, 0.08),
                          rng.uniform(0.03, 0.08)};
                s.center = anchor + s.half.z * plane_n;
                break;
            case Solid::Cylinder:
                s.r = rng.uniform(0.03, 0.07);
                s.height = rng.uniform(0.08, 0.2);
                s.axis = plane_n;
                s.center = anchor;
                break;
        }
        solids.push_back(s);
    }
    // Keep at least one transparent object whenever the scene has solids.
    if (!solids.empty()) {
        bool any = false;
        for (const auto& s : solids) any |= s.transparent;
        if (!any) solids[0].transparent = true;
    }

    out.gt_depth = DepthMap(h, w);
    out.raw_depth = DepthMap(h, w);
    out.mask = TransparencyMask(h, w);
    out.rgb = ImageRGB(h, w);

    DepthMap background(h, w);  // scene without transparent objects
    std::vector<int> hit_id(static_cast<size_t>(h) * w, -1);      // -1 = table
    std::vector<int> bg_hit_id(static_cast<size_t>(h) * w, -1);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec3 dir = {(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0};
            double z_gt = table_depth(dir);
            double z_bg = z_gt;
            int id_gt = -1, id_bg = -1;
            for (size_t si = 0; si < solids.size(); ++si) {
                const double z = hit_solid(dir, solids[si]);
                if (z < z_gt) {
                    z_gt = z;
                    id_gt = static_cast<int>(si);
                }
                if (!solids[si].transparent && z < z_bg) {
                    z_bg = z;
                    id_bg = static_cast<int>(si);
                }
            }
            if (z_gt >= kInf) {  // horizon fallback: clamp to far range
                z_gt = spec.table_depth_max * 1.4;
                z_bg = z_gt;
            }
            out.gt_depth.at(y, x) = z_gt;
            background.at(y, x) = std::min(z_bg, spec.table_depth_max * 1.4);
            hit_id[out.gt_depth.w * static_cast<size_t>(y) + x] = id_gt;
            bg_hit_id[out.gt_depth.w * static_cast<size_t>(y) + x] = id_bg;
            out.mask.set(y, x, id_gt >= 0 && solids[id_gt].transparent);
        }

    // Geometric side information comes from the ground truth. Boundary
    // detection excludes masked pixels: their depth is the reconstruction
    // target, so silhouette discontinuities of transparent objects must not
    // cut the optimizer's coupling to the surround.
    out.normals = geo::normals_from_depth(out.gt_depth, k);
    out.boundaries = geo::detect_boundaries(out.gt_depth, spec.boundary_threshold, out.mask);

    // Shading from the background surface (transparent objects are
    // see-through), a rim highlight where transparent surfaces graze.
    const Vec3 light = normalized({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), -1.0});
    const double ambient = rng.uniform(0.15, 0.3);
    double table_albedo[3];
    for (double& a : table_albedo) a = rng.uniform(0.2, 0.9);
    const NormalMap bg_normals = geo::normals_from_depth(background, k);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t i = static_cast<size_t>(y) * w + x;
            const Vec3 n = {bg_normals.nx[i], bg_normals.ny[i], bg_normals.nz[i]};
            const double diffuse = std::max(0.0, dot(n, light));
            const double* albedo =
                bg_hit_id[i] >= 0 ? solids[bg_hit_id[i]].albedo : table_albedo;
            const double shade = ambient + 0.7 * diffuse;
            double rim = 0.0, tint = 0.0;
            if (out.mask.at(y, x)) {
                const Vec3 v = normalized({(x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0});
                const Vec3 gn = {out.normals.nx[i], out.normals.ny[i], out.normals.nz[i]};
                const double grazing = 1.0 - std::abs(dot(gn, v));
                rim = 0.45 * grazing * grazing;
                tint = 0.04;
            }
            for (int c = 0; c < 3; ++c) {
                const double v = albedo[c] * shade + rim + (c == 2 ? tint : 0.0);
                out.rgb.at(c, y, x) = std::min(1.0, std::max(0.0, v));
            }
        }

    // Sensor corruption inside the mask only.
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!out.mask.at(y, x)) {
                out.raw_depth.at(y, x) = out.gt_depth.at(y, x);
                continue;
            }
            if (rng.uniform() < spec.hole_prob) {
                out.raw_depth.at(y, x) = 0.0;
                out.raw_depth.set_valid(y, x, false);
                continue;
            }
            const double leaked = background.at(y, x) + spec.leak_sigma * rng.normal() +
                                  spec.noise_sigma * rng.normal();
            out.raw_depth.at(y, x) = std::max(0.05, leaked);
        }
    return out;
}

DatasetKind parse_dataset_kind(const std::string& name) {
    if (name == "synthetic") return DatasetKind::synthetic;
    if (name == "cleargrasp") return DatasetKind::cleargrasp;
    if (name == "transcg") return DatasetKind::transcg;
    throw invalid_argument("unknown dataset kind '" + name +
                           "' (expected synthetic|cleargrasp|transcg)");
}

void save_sample(const std::filesystem::path& dir, const SceneSample& sample,
                 uint64_t spec_hash_value) {
    std::filesystem::create_directories(dir);
    io::save_rgb_png(dir / "rgb.png", sample.rgb);
    io::save_depth_png(dir / "depth_raw.png", sample.raw_depth);
    io::save_depth_png(dir / "depth_gt.png", sample.gt_depth);
    io::save_mask_png(dir / "mask.png", sample.mask);
    std::ofstream meta(dir / "meta.txt");
    meta << meta_text(sample, spec_hash_value);
}

namespace {

struct SampleFiles {
    std::filesystem::path rgb, raw, gt, mask, meta;
};

SampleFiles sample_files(const std::filesystem::path& root, DatasetKind kind,
                         const std::string& id) {
    switch (kind) {
        case DatasetKind::synthetic: {
            const auto dir = root / id;
            return {dir / "rgb.png", dir / "depth_raw.png", dir / "depth_gt.png",
                    dir / "mask.png", dir / "meta.txt"};
        }
        case DatasetKind::cleargrasp: {
            const auto base = root / id;
            return {base.string() + "-rgb.png", base.string() + "-transparent-depth.png",
                    base.string() + "-opaque-depth.png", base.string() + "-mask.png",
                    base.string() + "-meta.txt"};
        }
        case DatasetKind::transcg: {
            const auto dir = root / id;
            return {dir / "rgb1.png", dir / "depth1.png", dir / "depth1_gt.png",
                    dir / "depth1_gt_mask.png", dir / "meta.txt"};
        }
    }
    throw invalid_argument("sample_files: bad kind");
}

}  // namespace

std::vector<double> resample_area(const std::vector<double>& src, int sh, int sw, int th,
                                  int tw) {
    std::vector<double> dst(static_cast<size_t>(th) * tw, 0.0);
    const double sy = static_cast<double>(sh) / th;
    const double sx = static_cast<double>(sw) / tw;
    for (int y = 0; y < th; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        for (int x = 0; x < tw; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            double acc = 0.0, area = 0.0;
            for (int yy = static_cast<int>(y0); yy < static_cast<int>(std::ceil(y1)); ++yy) {
                const double oy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
                if (oy <= 0) continue;
                for (int xx = static_cast<int>(x0); xx < static_cast<int>(std::ceil(x1)); ++xx) {
                    const double ox = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
                    if (ox <= 0) continue;
                    acc += src[static_cast<size_t>(yy) * sw + xx] * oy * ox;
                    area += oy * ox;
                }
            }
            dst[static_cast<size_t>(y) * tw + x] = area > 0 ? acc / area : 0.0;
        }
    }
    return dst;
}

DepthMap resample_depth_area(const DepthMap& src, int th, int tw) {
    DepthMap dst(th, tw);
    const double sy = static_cast<double>(src.h) / th;
    const double sx = static_cast<double>(src.w) / tw;
    for (int y = 0; y < th; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        for (int x = 0; x < tw; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            double acc = 0.0, area = 0.0;
            for (int yy = static_cast<int>(y0); yy < static_cast<int>(std::ceil(y1)); ++yy) {
                const double oy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
                if (oy <= 0) continue;
                for (int xx = static_cast<int>(x0); xx < static_cast<int>(std::ceil(x1)); ++xx) {
                    const double ox = std::min<double>(xx + 1, x1) - std::max<double>(xx, x0);
                    if (ox <= 0 || !src.is_valid(yy, xx)) continue;
                    acc += src.at(yy, xx) * oy * ox;
                    area += oy * ox;
                }
            }
            if (area > 0) {
                dst.at(y, x) = acc / area;
            } else {
                dst.at(y, x) = 0.0;
                dst.set_valid(y, x, false);
            }
        }
    }
    return dst;
}

TransparencyMask resample_mask_nearest(const TransparencyMask& src, int th, int tw) {
    TransparencyMask dst(th, tw);
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) {
            const int yy = std::min(src.h - 1, static_cast<int>((y + 0.5) * src.h / th));
            const int xx = std::min(src.w - 1, static_cast<int>((x + 0.5) * src.w / tw));
            dst.set(y, x, src.at(yy, xx));
        }
    return dst;
}

SceneSample load_sample(const std::filesystem::path& root, DatasetKind kind,
                        const std::string& id, int target_w, int target_h,
                        double boundary_threshold) {
    const SampleFiles files = sample_files(root, kind, id);
    for (const auto& p : {files.rgb, files.raw, files.gt, files.mask})
        if (!std::filesystem::exists(p)) throw input_error("missing file: " + p.string());

    SceneSample s;
    s.id = id;
    s.rgb = io::load_rgb_png(files.rgb);
    s.raw_depth = io::load_depth_png(files.raw);
    s.gt_depth = io::load_depth_png(files.gt);
    s.mask = io::load_mask_png(files.mask);

    if (s.raw_depth.h != s.rgb.h || s.raw_depth.w != s.rgb.w || s.gt_depth.h != s.rgb.h ||
        s.gt_depth.w != s.rgb.w || s.mask.h != s.rgb.h || s.mask.w != s.rgb.w)
        throw input_error("resolution mismatch within sample '" + id + "'");

    bool any_valid = false;
    for (uint8_t v : s.raw_depth.valid) any_valid |= (v != 0);
    if (!any_valid)
        std::cerr << "warning: sample '" << id << "' raw depth has no valid pixels\n";

    // Intrinsics from the meta file, or a generic tabletop default.
    const auto meta = parse_meta(files.meta);
    auto meta_d = [&](const char* key, double fallback) {
        auto it = meta.find(key);
        return it == meta.end() ? fallback : std::stod(it->second);
    };
    s.intrinsics.fx = meta_d("fx", 1.1 * s.rgb.w);
    s.intrinsics.fy = meta_d("fy", 1.1 * s.rgb.w);
    s.intrinsics.cx = meta_d("cx", (s.rgb.w - 1) / 2.0);
    s.intrinsics.cy = meta_d("cy", (s.rgb.h - 1) / 2.0);

    if (target_w > 0 && target_h > 0 && (target_w != s.rgb.w || target_h != s.rgb.h)) {
        const int sw = s.rgb.w, sh = s.rgb.h;
        ImageRGB rgb(target_h, target_w);
        for (int c = 0; c < 3; ++c) {
            std::vector<double> plane(s.rgb.data.begin() + static_cast<size_t>(c) * sh * sw,
                                      s.rgb.data.begin() + static_cast<size_t>(c + 1) * sh * sw);
            const auto res = resample_area(plane, sh, sw, target_h, target_w);
            std::copy(res.begin(), res.end(),
                      rgb.data.begin() + static_cast<size_t>(c) * target_h * target_w);
        }
        s.rgb = std::move(rgb);
        s.raw_depth = resample_depth_area(s.raw_depth, target_h, target_w);
        s.gt_depth = resample_depth_area(s.gt_depth, target_h, target_w);
        s.mask = resample_mask_nearest(s.mask, target_h, target_w);
        s.intrinsics.fx *= static_cast<double>(target_w) / sw;
        s.intrinsics.fy *= static_cast<double>(target_h) / sh;
        s.intrinsics.cx = (s.intrinsics.cx + 0.5) * target_w / sw - 0.5;
        s.intrinsics.cy = (s.intrinsics.cy + 0.5) * target_h / sh - 0.5;
    }

    // Synthesize the geometric side information from ground truth; masked
    // pixels are excluded from boundary detection (see generate_scene).
    if (s.gt_depth.h >= 2 && s.gt_depth.w >= 2) {
        bool gt_complete = true;
        for (uint8_t v : s.gt_depth.valid) gt_complete &= (v != 0);
        if (gt_complete) {
            s.normals = geo::normals_from_depth(s.gt_depth, s.intrinsics);
            s.boundaries = geo::detect_boundaries(s.gt_depth, boundary_threshold, s.mask);
        } else {
            s.normals = NormalMap(s.gt_depth.h, s.gt_depth.w);
            s.boundaries = BoundaryMap(s.gt_depth.h, s.gt_depth.w, 1.0);
        }
    }
    return s;
}

SplitIds split(const std::vector<std::string>& corpus, double f_train, double f_val,
               double f_test, uint64_t seed) {
    if (corpus.empty()) throw invalid_argument("split: empty corpus");
    if (f_train < 0 || f_val < 0 || f_test < 0 ||
        std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw invalid_argument("split: fractions must be non-negative and sum to 1");

    std::vector<std::string> ids = corpus;
    Rng rng(Rng::derive(seed, 0x5B117));
    for (size_t i = ids.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(ids[i - 1], ids[j]);
    }
    const auto n = static_cast<long>(ids.size());
    const long n_train = std::lround(f_train * n);
    const long n_val = std::min<long>(std::lround(f_val * n), n - n_train);
    SplitIds out;
    out.train.assign(ids.begin(), ids.begin() + n_train);
    out.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    out.test.assign(ids.begin() + n_train + n_val, ids.end());
    return out;
}

void generate_corpus(const std::filesystem::path& root, const SynthSpec& spec, int n_train,
                     int n_val, int n_test, uint64_t seed) {
    spec.validate();
    std::filesystem::create_directories(root);
    const uint64_t hash_value = spec_hash(spec);

    const std::pair<const char*, int> splits[] = {
        {"train", n_train}, {"val", n_val}, {"test", n_test}};
    for (const auto& [name, count] : splits) {
        for (int i = 0; i < count; ++i) {
            char idbuf[16];
            std::snprintf(idbuf, sizeof(idbuf), "%06d", i);
            const std::string rel = std::string(name) + "/" + idbuf;
            Rng rng(Rng::derive(seed, Rng::hash_bytes(rel.data(), rel.size())));
            const SceneSample sample = generate_scene(spec, rng, rel);
            save_sample(root / name / idbuf, sample, hash_value);
        }
    }
    std::ofstream meta(root / "corpus.txt");
    meta.precision(17);
    meta << "seed = " << seed << "\n"
         << "train = " << n_train << "\nval = " << n_val << "\ntest = " << n_test << "\n"
         << "width = " << spec.width << "\nheight = " << spec.height << "\n";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash_value));
    meta << "spec_hash = " << buf << "\n";
}

std::vector<std::string> list_corpus_ids(const std::filesystem::path& root,
                                         const std::string& split) {
    const auto dir = root / split;
    if (!std::filesystem::is_directory(dir))
        throw input_error("corpus split directory missing: " + dir.string());
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace depthdiff::data
