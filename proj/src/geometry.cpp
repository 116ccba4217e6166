// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/geometry.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::geo {
namespace {

void check_same_shape(int h1, int w1, int h2, int w2, const char* op) {
    if (h1 != h2 || w1 != w2)
        throw invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(h1) +
                               "x" + std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                               std::to_string(w2) + ")");
}

// Back-projection ray for pixel (y, x); depth D maps to the 3D point D * ray.
inline void pixel_ray(const CameraIntrinsics& k, int y, int x, double& rx, double& ry) {
    rx = (x - k.cx) / k.fx;
    ry = (y - k.cy) / k.fy;
}

// One linear edge residual c_p * D_p + c_q * D_q with weight w.
struct EdgeTerm {
    int p, q;
    double cp, cq, w;
};

struct LinearSystem {
    int n = 0;
    std::vector<EdgeTerm> edges;
    std::vector<double> diag;  // Jacobi preconditioner / assembled diagonal
    std::vector<double> rhs;

    void apply(const std::vector<double>& x, std::vector<double>& y,
               const std::vector<double>& obs_w) const {
        for (int i = 0; i < n; ++i) y[i] = obs_w[i] * x[i];
        for (const auto& e : edges) {
            const double r = e.cp * x[e.p] + e.cq * x[e.q];
            y[e.p] += e.w * e.cp * r;
            y[e.q] += e.w * e.cq * r;
        }
    }
};

// Builds the normal-equation system for the three-term energy on a grid in
// row-major order. obs_w holds w_obs at valid pixels, 0 elsewhere.
void assemble(const DepthMap& sparse, const NormalMap& normals, const BoundaryMap& boundaries,
              const OptimizeWeights& wt, const CameraIntrinsics& k, LinearSystem& sys,
              std::vector<double>& obs_w) {
    const int h = sparse.h, w = sparse.w;
    sys.n = h * w;
    sys.edges.clear();
    sys.edges.reserve(static_cast<size_t>(2 * h) * w * 2);
    sys.diag.assign(sys.n, 0.0);
    sys.rhs.assign(sys.n, 0.0);
    obs_w.assign(sys.n, 0.0);

    for (int i = 0; i < sys.n; ++i) {
        if (sparse.valid[i]) {
            obs_w[i] = wt.w_obs;
            sys.diag[i] += wt.w_obs;
            sys.rhs[i] = wt.w_obs * sparse.values[i];
        }
    }

    auto add_edge = [&](int py, int px, int qy, int qx) {
        const int p = py * w + px;
        const int q = qy * w + qx;
        const double b = boundaries.at(py, px) * boundaries.at(qy, qx);
        if (b <= 0.0) return;

        // Smoothness: (D_p - D_q)^2
        if (wt.w_smooth > 0.0) {
            sys.edges.push_back({p, q, 1.0, -1.0, wt.w_smooth * b});
            sys.diag[p] += wt.w_smooth * b;
            sys.diag[q] += wt.w_smooth * b;
        }

        // Normal-tangent orthogonality: tangent t = D_q * r_q - D_p * r_p,
        // residual = n_mean . t = a_q * D_q - a_p * D_p.
        if (wt.w_normal > 0.0) {
            double rpx, rpy, rqx, rqy;
            pixel_ray(k, py, px, rpx, rpy);
            pixel_ray(k, qy, qx, rqx, rqy);
            const size_t ip = static_cast<size_t>(p), iq = static_cast<size_t>(q);
            const double mx = 0.5 * (normals.nx[ip] + normals.nx[iq]);
            const double my = 0.5 * (normals.ny[ip] + normals.ny[iq]);
            const double mz = 0.5 * (normals.nz[ip] + normals.nz[iq]);
            const double ap = mx * rpx + my * rpy + mz;
            const double aq = mx * rqx + my * rqy + mz;
            const double we = wt.w_normal * b;
            sys.edges.push_back({p, q, -ap, aq, we});
            sys.diag[p] += we * ap * ap;
            sys.diag[q] += we * aq * aq;
        }
    };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) add_edge(y, x, y, x + 1);
            if (y + 1 < h) add_edge(y, x, y + 1, x);
        }
}

struct TransposedScene {
    DepthMap sparse;
    NormalMap normals;
    BoundaryMap boundaries;
    CameraIntrinsics intrinsics;
};

TransposedScene transpose_scene(const DepthMap& sparse, const NormalMap& normals,
                                const BoundaryMap& boundaries, const CameraIntrinsics& k) {
    const int h = sparse.h, w = sparse.w;
    TransposedScene t;
    t.sparse = DepthMap(w, h);
    t.normals = NormalMap(w, h);
    t.boundaries = BoundaryMap(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            t.sparse.at(x, y) = sparse.at(y, x);
            t.sparse.set_valid(x, y, sparse.is_valid(y, x));
            t.boundaries.at(x, y) = boundaries.at(y, x);
            const size_t src = normals.idx(y, x);
            const size_t dst = t.normals.idx(x, y);
            t.normals.nx[dst] = normals.ny[src];  // pixel axes swap => 3D x/y swap
            t.normals.ny[dst] = normals.nx[src];
            t.normals.nz[dst] = normals.nz[src];
        }
    t.intrinsics = CameraIntrinsics{k.fy, k.fx, k.cy, k.cx};
    return t;
}

}  // namespace

DepthMap mask_invalid_depth(const DepthMap& raw, const TransparencyMask& mask) {
    check_same_shape(raw.h, raw.w, mask.h, mask.w, "mask_invalid_depth");
    DepthMap out = raw;
    for (size_t i = 0; i < out.valid.size(); ++i)
        if (mask.mask[i]) out.valid[i] = 0;
    return out;
}

NormalMap normals_from_depth(const DepthMap& depth, const CameraIntrinsics& k) {
    if (depth.h < 2 || depth.w < 2)
        throw invalid_argument("normals_from_depth: needs at least 2x2 depth");
    if (!(k.fx > 0.0 && k.fy > 0.0))
        throw invalid_argument("normals_from_depth: focal lengths must be positive");

    const int h = depth.h, w = depth.w;
    NormalMap out(h, w);

    auto point = [&](int y, int x, double p[3]) {
        double rx, ry;
        pixel_ray(k, y, x, rx, ry);
        const double d = depth.at(y, x);
        p[0] = d * rx;
        p[1] = d * ry;
        p[2] = d;
    };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int x0 = (x > 0) ? x - 1 : x;
            const int x1 = (x + 1 < w) ? x + 1 : x;
            const int y0 = (y > 0) ? y - 1 : y;
            const int y1 = (y + 1 < h) ? y + 1 : y;
            double pa[3], pb[3], pc[3], pd[3];
            point(y, x0, pa);
            point(y, x1, pb);
            point(y0, x, pc);
            point(y1, x, pd);
            const double tu[3] = {pb[0] - pa[0], pb[1] - pa[1], pb[2] - pa[2]};
            const double tv[3] = {pd[0] - pc[0], pd[1] - pc[1], pd[2] - pc[2]};
            double n[3] = {tu[1] * tv[2] - tu[2] * tv[1], tu[2] * tv[0] - tu[0] * tv[2],
                           tu[0] * tv[1] - tu[1] * tv[0]};
            const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
            const size_t i = out.idx(y, x);
            if (len < 1e-14) {
                out.nx[i] = 0.0;
                out.ny[i] = 0.0;
                out.nz[i] = -1.0;
                continue;
            }
            double s = 1.0 / len;
            if (n[2] > 0.0) s = -s;  // toward the camera
            out.nx[i] = n[0] * s;
            out.ny[i] = n[1] * s;
            out.nz[i] = n[2] * s;
        }
    return out;
}

BoundaryMap detect_boundaries(const DepthMap& depth, double threshold,
                              const TransparencyMask& mask) {
    check_same_shape(depth.h, depth.w, mask.h, mask.w, "detect_boundaries");
    if (!(threshold > 0.0)) throw invalid_argument("detect_boundaries: threshold must be > 0");

    const int h = depth.h, w = depth.w;
    BoundaryMap out(h, w, 1.0);
    auto usable = [&](int y, int x) { return depth.is_valid(y, x) && !mask.at(y, x); };

    static constexpr int dy[4] = {0, 0, -1, 1};
    static constexpr int dx[4] = {-1, 1, 0, 0};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!usable(y, x)) continue;
            double max_diff = 0.0;
            for (int k4 = 0; k4 < 4; ++k4) {
                const int ny = y + dy[k4], nx = x + dx[k4];
                if (ny < 0 || ny >= h || nx < 0 || nx >= w || !usable(ny, nx)) continue;
                max_diff = std::max(max_diff, std::abs(depth.at(y, x) - depth.at(ny, nx)));
            }
            if (max_diff > threshold) out.at(y, x) = 0.0;
        }
    return out;
}

double depth_energy(const DepthMap& candidate, const DepthMap& sparse, const NormalMap& normals,
                    const BoundaryMap& boundaries, const OptimizeWeights& weights,
                    const CameraIntrinsics& intrinsics) {
    check_same_shape(candidate.h, candidate.w, sparse.h, sparse.w, "depth_energy");
    LinearSystem sys;
    std::vector<double> obs_w;
    assemble(sparse, normals, boundaries, weights, intrinsics, sys, obs_w);

    double e = 0.0;
    for (int i = 0; i < sys.n; ++i) {
        if (obs_w[i] > 0.0) {
            const double d = candidate.values[i] - sparse.values[i];
            e += obs_w[i] * d * d;
        }
    }
    for (const auto& t : sys.edges) {
        const double r = t.cp * candidate.values[t.p] + t.cq * candidate.values[t.q];
        e += t.w * r * r;
    }
    return e;
}

DepthMap global_optimize_depth(const DepthMap& sparse, const NormalMap& normals,
                               const BoundaryMap& boundaries, const OptimizeWeights& weights,
                               const CameraIntrinsics& intrinsics,
                               const OptimizeOptions& options) {
    check_same_shape(sparse.h, sparse.w, normals.h, normals.w, "global_optimize_depth");
    check_same_shape(sparse.h, sparse.w, boundaries.h, boundaries.w, "global_optimize_depth");
    if (!(weights.w_obs > 0.0 && weights.w_normal >= 0.0 && weights.w_smooth >= 0.0))
        throw invalid_argument("global_optimize_depth: weights must be positive");
    if (sparse.h < 2 || sparse.w < 2)
        throw invalid_argument("global_optimize_depth: needs at least 2x2 grid");

    bool any_obs = false;
    for (uint8_t v : sparse.valid) any_obs |= (v != 0);
    if (!any_obs)
        throw invalid_argument(
            "global_optimize_depth: no valid observations (system has a null direction)");

    // Canonical orientation: solve with H <= W so a transposed scene yields
    // the bitwise-transposed solution.
    if (sparse.h > sparse.w) {
        const TransposedScene t = transpose_scene(sparse, normals, boundaries, intrinsics);
        const DepthMap sol = global_optimize_depth(t.sparse, t.normals, t.boundaries, weights,
                                                   t.intrinsics, options);
        DepthMap out(sparse.h, sparse.w);
        for (int y = 0; y < sparse.h; ++y)
            for (int x = 0; x < sparse.w; ++x) out.at(y, x) = sol.at(x, y);
        return out;
    }

    LinearSystem sys;
    std::vector<double> obs_w;
    assemble(sparse, normals, boundaries, weights, intrinsics, sys, obs_w);
    const int n = sys.n;

    // Warm start: observed values where present, mean of observations elsewhere.
    double obs_mean = 0.0;
    int obs_count = 0;
    for (int i = 0; i < n; ++i)
        if (obs_w[i] > 0.0) {
            obs_mean += sparse.values[i];
            ++obs_count;
        }
    obs_mean /= obs_count;
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = obs_w[i] > 0.0 ? sparse.values[i] : obs_mean;

    // Jacobi-preconditioned conjugate gradients on A x = rhs.
    std::vector<double> r(n), z(n), p(n), ap(n);
    sys.apply(x, ap, obs_w);
    double rhs_norm2 = 0.0;
    for (int i = 0; i < n; ++i) {
        r[i] = sys.rhs[i] - ap[i];
        rhs_norm2 += sys.rhs[i] * sys.rhs[i];
    }
    const double stop2 = options.cg_tol * options.cg_tol * rhs_norm2;

    auto precond = [&](const std::vector<double>& in, std::vector<double>& out) {
        for (int i = 0; i < n; ++i) out[i] = sys.diag[i] > 0.0 ? in[i] / sys.diag[i] : in[i];
    };

    precond(r, z);
    p = z;
    double rz = 0.0, rr = 0.0;
    for (int i = 0; i < n; ++i) {
        rz += r[i] * z[i];
        rr += r[i] * r[i];
    }

    const long max_iter = static_cast<long>(options.cg_max_iter_factor) * n;
    long iter = 0;
    while (rr > stop2 && iter < max_iter) {
        sys.apply(p, ap, obs_w);
        double pap = 0.0;
        for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
        if (pap <= 0.0)
            throw numeric_error("global_optimize_depth: CG breakdown (non-positive curvature)");
        const double alpha = rz / pap;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(r, z);
        double rz_new = 0.0;
        rr = 0.0;
        for (int i = 0; i < n; ++i) {
            rz_new += r[i] * z[i];
            rr += r[i] * r[i];
        }
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        ++iter;
    }

    if (rr > stop2)
        throw numeric_error("global_optimize_depth: CG did not converge after " +
                            std::to_string(max_iter) + " iterations (relative residual " +
                            std::to_string(std::sqrt(rr / rhs_norm2)) + ")");

    DepthMap out(sparse.h, sparse.w);
    out.values = std::move(x);
    return out;
}

}  // namespace depthdiff::geo
