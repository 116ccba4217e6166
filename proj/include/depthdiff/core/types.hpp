// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace depthdiff {

/// Pinhole camera model; pixel (x, y) back-projects to depth * ray(x, y)
/// with ray = ((x - cx) / fx, (y - cy) / fy, 1).
struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
};

/// Single-channel depth map in meters with a per-pixel validity flag.
/// A pixel with validity false carries no observation; its value is
/// whatever the producer left there (0 for sensor dropouts).
struct DepthMap {
    int h = 0;
    int w = 0;
    std::vector<double> values;      // row-major, h*w
    std::vector<uint8_t> valid;      // row-major, h*w

    DepthMap() = default;
    DepthMap(int h_, int w_, double fill = 0.0, bool valid_fill = true)
        : h(h_), w(w_), values(static_cast<size_t>(h_) * w_, fill),
          valid(static_cast<size_t>(h_) * w_, valid_fill ? 1 : 0) {}

    double& at(int y, int x) { return values[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return values[static_cast<size_t>(y) * w + x]; }
    bool is_valid(int y, int x) const { return valid[static_cast<size_t>(y) * w + x] != 0; }
    void set_valid(int y, int x, bool v) { valid[static_cast<size_t>(y) * w + x] = v ? 1 : 0; }
    size_t size() const { return values.size(); }
};

/// Per-pixel unit surface normals in the camera frame, z pointing toward
/// the camera (a fronto-parallel surface has normal (0, 0, -1)).
struct NormalMap {
    int h = 0;
    int w = 0;
    std::vector<double> nx, ny, nz;  // row-major planes

    NormalMap() = default;
    NormalMap(int h_, int w_)
        : h(h_), w(w_), nx(static_cast<size_t>(h_) * w_, 0.0),
          ny(static_cast<size_t>(h_) * w_, 0.0),
          nz(static_cast<size_t>(h_) * w_, -1.0) {}

    size_t idx(int y, int x) const { return static_cast<size_t>(y) * w + x; }
};

/// Occlusion-boundary weights in [0, 1]: 1 = smooth surface, 0 = hard
/// depth discontinuity. Down-weights coupling terms in the optimizer.
struct BoundaryMap {
    int h = 0;
    int w = 0;
    std::vector<double> weights;

    BoundaryMap() = default;
    BoundaryMap(int h_, int w_, double fill = 1.0)
        : h(h_), w(w_), weights(static_cast<size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return weights[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return weights[static_cast<size_t>(y) * w + x]; }
};

/// Marks pixels belonging to transparent objects whose sensor depth is
/// untrustworthy.
struct TransparencyMask {
    int h = 0;
    int w = 0;
    std::vector<uint8_t> mask;

    TransparencyMask() = default;
    TransparencyMask(int h_, int w_, bool fill = false)
        : h(h_), w(w_), mask(static_cast<size_t>(h_) * w_, fill ? 1 : 0) {}

    bool at(int y, int x) const { return mask[static_cast<size_t>(y) * w + x] != 0; }
    void set(int y, int x, bool v) { mask[static_cast<size_t>(y) * w + x] = v ? 1 : 0; }
};

/// RGB image with channel planes in [0, 1], layout (c, y, x).
struct ImageRGB {
    int h = 0;
    int w = 0;
    std::vector<double> data;  // 3 * h * w, plane-major

    ImageRGB() = default;
    ImageRGB(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), data(3 * static_cast<size_t>(h_) * w_, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * h + y) * w + x];
    }
};

/// One RGB-D training/evaluation example.
struct SceneSample {
    std::string id;
    ImageRGB rgb;
    DepthMap raw_depth;       // sensor-corrupted
    DepthMap gt_depth;        // complete ground truth
    TransparencyMask mask;
    NormalMap normals;        // derived from gt_depth
    BoundaryMap boundaries;   // derived from gt_depth
    CameraIntrinsics intrinsics;
};

}  // namespace depthdiff
