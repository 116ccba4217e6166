// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/core/rng.hpp"
#include "depthdiff/geometry.hpp"

using namespace depthdiff;
using namespace depthdiff::geo;

namespace {

// ---- independent oracle ---------------------------------------------------
// Energy evaluated directly from its definition; used only to build the
// dense normal equations for a direct solve, so it must not share code with
// the solver.

struct OracleScene {
    DepthMap sparse;
    NormalMap normals;
    BoundaryMap boundaries;
    OptimizeWeights weights;
    CameraIntrinsics k;
};

double oracle_energy(const std::vector<double>& d, const OracleScene& sc) {
    const int h = sc.sparse.h, w = sc.sparse.w;
    double e = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (sc.sparse.is_valid(y, x)) {
                const double r = d[y * w + x] - sc.sparse.at(y, x);
                e += sc.weights.w_obs * r * r;
            }
    auto ray = [&](int y, int x, double out[2]) {
        out[0] = (x - sc.k.cx) / sc.k.fx;
        out[1] = (y - sc.k.cy) / sc.k.fy;
    };
    auto edge = [&](int py, int px, int qy, int qx) {
        const double b = sc.boundaries.at(py, px) * sc.boundaries.at(qy, qx);
        const int p = py * w + px, q = qy * w + qx;
        const double ds = d[p] - d[q];
        double e_loc = sc.weights.w_smooth * b * ds * ds;
        double rp[2], rq[2];
        ray(py, px, rp);
        ray(qy, qx, rq);
        const size_t ip = sc.normals.idx(py, px), iq = sc.normals.idx(qy, qx);
        const double nx = 0.5 * (sc.normals.nx[ip] + sc.normals.nx[iq]);
        const double ny = 0.5 * (sc.normals.ny[ip] + sc.normals.ny[iq]);
        const double nz = 0.5 * (sc.normals.nz[ip] + sc.normals.nz[iq]);
        // tangent = d_q * ray_q - d_p * ray_p, residual = normal . tangent
        const double tx = d[q] * rq[0] - d[p] * rp[0];
        const double ty = d[q] * rq[1] - d[p] * rp[1];
        const double tz = d[q] - d[p];
        const double rn = nx * tx + ny * ty + nz * tz;
        e_loc += sc.weights.w_normal * b * rn * rn;
        return e_loc;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (x + 1 < w) e += edge(y, x, y, x + 1);
            if (y + 1 < h) e += edge(y, x, y + 1, x);
        }
    return e;
}

// Dense direct solve of the normal equations built by finite-differencing
// the (exactly quadratic) oracle energy.
std::vector<double> oracle_dense_solve(const OracleScene& sc) {
    const int n = sc.sparse.h * sc.sparse.w;
    std::vector<double> zero(n, 0.0);

    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) {
        std::vector<double> plus = zero, minus = zero;
        plus[i] = 1.0;
        minus[i] = -1.0;
        b[i] = -(oracle_energy(plus, sc) - oracle_energy(minus, sc)) / 4.0;
    }
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    const double e0 = oracle_energy(zero, sc);
    for (int i = 0; i < n; ++i) {
        std::vector<double> ei = zero;
        ei[i] = 1.0;
        const double eii = oracle_energy(ei, sc);
        ei[i] = -1.0;
        const double eim = oracle_energy(ei, sc);
        a[i][i] = (eii + eim - 2 * e0) / 2.0;
        for (int j = i + 1; j < n; ++j) {
            std::vector<double> pp = zero;
            pp[i] = 1.0;
            pp[j] = 1.0;
            const double epp = oracle_energy(pp, sc);
            pp[j] = -1.0;
            const double epm = oracle_energy(pp, sc);
            pp[i] = -1.0;
            const double emm = oracle_energy(pp, sc);
            pp[j] = 1.0;
            const double emp = oracle_energy(pp, sc);
            a[i][j] = a[j][i] = (epp - epm - emp + emm) / 8.0;
        }
    }
    // Gaussian elimination with partial pivoting.
    std::vector<double> x = b;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        std::swap(x[col], x[piv]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            x[r] -= f * x[col];
        }
    }
    for (int col = n - 1; col >= 0; --col) {
        for (int c = col + 1; c < n; ++c) x[col] -= a[col][c] * x[c];
        x[col] /= a[col][col];
    }
    return x;
}

CameraIntrinsics toy_intrinsics(int h, int w) {
    return {1.1 * w, 1.1 * w, (w - 1) / 2.0, (h - 1) / 2.0};
}

}  // namespace

TEST_CASE("mask_invalid_depth") {
    DepthMap d(3, 4, 1.0);
    TransparencyMask none(3, 4, false);
    const DepthMap same = mask_invalid_depth(d, none);
    CHECK(same.valid == d.valid);
    CHECK(same.values == d.values);

    TransparencyMask all(3, 4, true);
    const DepthMap cleared = mask_invalid_depth(d, all);
    for (uint8_t v : cleared.valid) CHECK(v == 0);
    CHECK(cleared.values == d.values);  // values untouched

    TransparencyMask one(3, 4, false);
    one.set(1, 2, true);
    const DepthMap single = mask_invalid_depth(d, one);
    int flipped = 0;
    for (size_t i = 0; i < single.valid.size(); ++i)
        if (single.valid[i] != d.valid[i]) ++flipped;
    CHECK(flipped == 1);
    CHECK_FALSE(single.is_valid(1, 2));

    TransparencyMask bad(2, 4, false);
    CHECK_THROWS_AS(mask_invalid_depth(d, bad), invalid_argument);
}

TEST_CASE("normals on a fronto-parallel plane point at the camera") {
    DepthMap d(6, 8, 1.3);
    const NormalMap n = normals_from_depth(d, toy_intrinsics(6, 8));
    for (size_t i = 0; i < n.nx.size(); ++i) {
        CHECK(n.nx[i] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(n.ny[i] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(n.nz[i] == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("normals on a tilted 3d plane match the analytic normal") {
    const int h = 12, w = 16;
    const CameraIntrinsics k = toy_intrinsics(h, w);
    const double a = 0.15, z0 = 1.0;  // plane z = z0 + a * X
    DepthMap d(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            d.at(y, x) = z0 / (1.0 - a * (x - k.cx) / k.fx);
    const NormalMap n = normals_from_depth(d, k);
    const double len = std::sqrt(1.0 + a * a);
    for (int y = 2; y < h - 2; ++y)
        for (int x = 2; x < w - 2; ++x) {
            const size_t i = n.idx(y, x);
            CHECK(std::abs(n.nx[i] - a / len) < 1e-3);
            CHECK(std::abs(n.ny[i]) < 1e-3);
            CHECK(std::abs(n.nz[i] + 1.0 / len) < 1e-3);
        }
    // Unit length everywhere.
    for (size_t i = 0; i < n.nx.size(); ++i)
        CHECK(std::abs(std::sqrt(n.nx[i] * n.nx[i] + n.ny[i] * n.ny[i] + n.nz[i] * n.nz[i]) -
                       1.0) < 1e-6);
}

TEST_CASE("normals handle 2x2 maps and degenerate tangents") {
    DepthMap d(2, 2);
    d.at(0, 0) = 1.0;
    d.at(0, 1) = 1.1;
    d.at(1, 0) = 0.9;
    d.at(1, 1) = 1.05;
    const NormalMap n = normals_from_depth(d, toy_intrinsics(2, 2));  // no OOB access
    CHECK(n.h == 2);

    DepthMap zeros(3, 3, 0.0);  // all tangents vanish
    const NormalMap fallback = normals_from_depth(zeros, toy_intrinsics(3, 3));
    for (size_t i = 0; i < fallback.nz.size(); ++i) {
        CHECK(fallback.nx[i] == 0.0);
        CHECK(fallback.ny[i] == 0.0);
        CHECK(fallback.nz[i] == -1.0);
    }
}

TEST_CASE("boundary detection") {
    TransparencyMask none(6, 6, false);
    DepthMap flat(6, 6, 1.0);
    const BoundaryMap all_one = detect_boundaries(flat, 0.5, none);
    for (double v : all_one.weights) CHECK(v == 1.0);

    // Two half-planes: weight 0 exactly on the two seam columns.
    DepthMap step(6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) step.at(y, x) = x < 3 ? 1.0 : 2.0;
    const BoundaryMap seam = detect_boundaries(step, 0.5, none);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            CHECK(seam.at(y, x) == ((x == 2 || x == 3) ? 0.0 : 1.0));

    // Threshold dominates the global range.
    const BoundaryMap lax = detect_boundaries(step, 1.5, none);
    for (double v : lax.weights) CHECK(v == 1.0);

    CHECK_THROWS_AS(detect_boundaries(step, 0.0, none), invalid_argument);
}

TEST_CASE("optimizer reproduces a consistent complete plane") {
    const int h = 6, w = 8;
    DepthMap plane(h, w, 1.0);
    NormalMap n(h, w);  // all (0,0,-1)
    BoundaryMap b(h, w, 1.0);
    const DepthMap out =
        global_optimize_depth(plane, n, b, {1000.0, 1.0, 1.0}, toy_intrinsics(h, w));
    for (int i = 0; i < h * w; ++i) CHECK(std::abs(out.values[i] - 1.0) < 1e-6);
    for (uint8_t v : out.valid) CHECK(v == 1);
}

TEST_CASE("optimizer fills a masked hole in a fronto-parallel plane") {
    const int h = 8, w = 8;
    DepthMap sparse(h, w, 1.0);
    for (int y = 2; y < 6; ++y)
        for (int x = 2; x < 6; ++x) {
            sparse.at(y, x) = 0.0;
            sparse.set_valid(y, x, false);
        }
    NormalMap n(h, w);
    BoundaryMap b(h, w, 1.0);
    OracleScene sc{sparse, n, b, {1000.0, 1.0, 1.0}, toy_intrinsics(h, w)};
    const DepthMap out = global_optimize_depth(sparse, n, b, sc.weights, sc.k);
    for (int i = 0; i < h * w; ++i) CHECK(std::abs(out.values[i] - 1.0) < 1e-4);

    // Against the dense direct solve of the same normal equations.
    const auto dense = oracle_dense_solve(sc);
    for (int i = 0; i < h * w; ++i) CHECK(std::abs(out.values[i] - dense[i]) < 1e-6);
}

TEST_CASE("two anchors on a strip give linear interpolation") {
    // 1-D discrete Laplace behaviour emulated on a two-row strip; both rows
    // carry the same anchors so vertical couplings vanish by symmetry.
    const int n = 9;
    DepthMap sparse(2, n, 0.0, false);
    for (int r = 0; r < 2; ++r) {
        sparse.at(r, 0) = 1.0;
        sparse.set_valid(r, 0, true);
        sparse.at(r, n - 1) = 2.0;
        sparse.set_valid(r, n - 1, true);
    }
    NormalMap normals(2, n);
    BoundaryMap b(2, n, 1.0);
    const OptimizeWeights wt{1e6, 0.0, 1.0};
    const DepthMap out = global_optimize_depth(sparse, normals, b, wt, toy_intrinsics(2, n));
    for (int r = 0; r < 2; ++r)
        for (int x = 0; x < n; ++x) {
            const double want = 1.0 + static_cast<double>(x) / (n - 1);
            CHECK(std::abs(out.at(r, x) - want) < 1e-6);
        }
}

TEST_CASE("CG matches the dense oracle on random consistent scenes") {
    Rng rng(77);
    for (int trial = 0; trial < 6; ++trial) {
        const int h = 3 + static_cast<int>(rng.uniform_int(0, 5));
        const int w = 3 + static_cast<int>(rng.uniform_int(0, 5));
        OracleScene sc;
        sc.k = toy_intrinsics(h, w);
        sc.weights = {rng.uniform(10.0, 2000.0), rng.uniform(0.1, 2.0),
                      rng.uniform(0.1, 2.0)};
        sc.sparse = DepthMap(h, w, 0.0, false);
        int obs = 0;
        for (int i = 0; i < h * w; ++i)
            if (rng.uniform() < 0.4) {
                sc.sparse.values[i] = rng.uniform(0.5, 2.0);
                sc.sparse.valid[i] = 1;
                ++obs;
            }
        if (obs == 0) {
            sc.sparse.values[0] = 1.0;
            sc.sparse.valid[0] = 1;
        }
        sc.normals = NormalMap(h, w);
        for (size_t i = 0; i < sc.normals.nx.size(); ++i) {
            double v[3] = {rng.normal() * 0.3, rng.normal() * 0.3, -1.0};
            const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            sc.normals.nx[i] = v[0] / len;
            sc.normals.ny[i] = v[1] / len;
            sc.normals.nz[i] = v[2] / len;
        }
        sc.boundaries = BoundaryMap(h, w, 1.0);
        for (auto& bw : sc.boundaries.weights)
            if (rng.uniform() < 0.1) bw = rng.uniform(0.2, 1.0);

        const DepthMap cg =
            global_optimize_depth(sc.sparse, sc.normals, sc.boundaries, sc.weights, sc.k);
        const auto dense = oracle_dense_solve(sc);
        double num = 0.0, den = 0.0;
        for (int i = 0; i < h * w; ++i) {
            num += (cg.values[i] - dense[i]) * (cg.values[i] - dense[i]);
            den += dense[i] * dense[i];
        }
        CHECK(std::sqrt(num / den) < 1e-6);
    }
}

TEST_CASE("boundary weights stop smoothing across a seam") {
    // Fully observed step with weak observations: without boundary weights
    // the smoothness term drags the seam together; with them the step is
    // reproduced to working precision.
    const int h = 8, w = 8;
    DepthMap full(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) full.at(y, x) = x < w / 2 ? 1.0 : 2.0;
    TransparencyMask none(h, w, false);
    NormalMap n(h, w);
    const OptimizeWeights wt{10.0, 0.0, 1.0};
    const CameraIntrinsics k = toy_intrinsics(h, w);

    const BoundaryMap b = detect_boundaries(full, 0.5, none);
    const DepthMap out = global_optimize_depth(full, n, b, wt, k);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) CHECK(std::abs(out.at(y, x) - full.at(y, x)) < 1e-3);

    // Control: with full coupling the same setup visibly leaks at the seam.
    const BoundaryMap all_one(h, w, 1.0);
    const DepthMap leaky = global_optimize_depth(full, n, all_one, wt, k);
    double worst = 0.0;
    for (int i = 0; i < h * w; ++i)
        worst = std::max(worst, std::abs(leaky.values[i] - full.values[i]));
    CHECK(worst > 1e-3);
}

TEST_CASE("transposing the scene transposes the result exactly") {
    Rng rng(31);
    const int h = 5, w = 9;
    DepthMap sparse(h, w, 0.0, false);
    for (int i = 0; i < h * w; ++i)
        if (rng.uniform() < 0.5) {
            sparse.values[i] = rng.uniform(0.5, 2.0);
            sparse.valid[i] = 1;
        }
    sparse.valid[0] = 1;
    sparse.values[0] = 1.0;
    NormalMap n(h, w);
    for (size_t i = 0; i < n.nx.size(); ++i) {
        double v[3] = {rng.normal() * 0.2, rng.normal() * 0.2, -1.0};
        const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        n.nx[i] = v[0] / len;
        n.ny[i] = v[1] / len;
        n.nz[i] = v[2] / len;
    }
    BoundaryMap b(h, w, 1.0);
    for (auto& bw : b.weights) bw = rng.uniform() < 0.15 ? 0.0 : 1.0;
    const CameraIntrinsics k = toy_intrinsics(h, w);

    const DepthMap direct = global_optimize_depth(sparse, n, b, {500.0, 1.0, 1.0}, k);

    // Transpose the full scene: swap pixel axes, normal x/y, intrinsics.
    DepthMap sparse_t(w, h);
    NormalMap n_t(w, h);
    BoundaryMap b_t(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            sparse_t.at(x, y) = sparse.at(y, x);
            sparse_t.set_valid(x, y, sparse.is_valid(y, x));
            b_t.at(x, y) = b.at(y, x);
            n_t.nx[n_t.idx(x, y)] = n.ny[n.idx(y, x)];
            n_t.ny[n_t.idx(x, y)] = n.nx[n.idx(y, x)];
            n_t.nz[n_t.idx(x, y)] = n.nz[n.idx(y, x)];
        }
    const CameraIntrinsics k_t{k.fy, k.fx, k.cy, k.cx};
    const DepthMap transposed =
        global_optimize_depth(sparse_t, n_t, b_t, {500.0, 1.0, 1.0}, k_t);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) CHECK(direct.at(y, x) == transposed.at(x, y));  // bitwise
}

TEST_CASE("optimizer rejects scenes without observations") {
    DepthMap sparse(4, 4, 0.0, false);
    NormalMap n(4, 4);
    BoundaryMap b(4, 4, 1.0);
    CHECK_THROWS_AS(global_optimize_depth(sparse, n, b, {1.0, 1.0, 1.0}, toy_intrinsics(4, 4)),
                    invalid_argument);
}

TEST_CASE("solution energy does not exceed nearest-neighbor fill energy") {
    Rng rng(55);
    for (int trial = 0; trial < 4; ++trial) {
        const int h = 8, w = 10;
        DepthMap sparse(h, w, 0.0, false);
        for (int i = 0; i < h * w; ++i)
            if (rng.uniform() < 0.5) {
                sparse.values[i] = rng.uniform(0.5, 2.0);
                sparse.valid[i] = 1;
            }
        sparse.values[0] = 1.0;
        sparse.valid[0] = 1;
        NormalMap n(h, w);
        BoundaryMap b(h, w, 1.0);
        const OptimizeWeights wt{1000.0, 1.0, 1.0};
        const CameraIntrinsics k = toy_intrinsics(h, w);
        const DepthMap solution = global_optimize_depth(sparse, n, b, wt, k);

        // Nearest-neighbor fill baseline.
        DepthMap nn_fill = sparse;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (sparse.is_valid(y, x)) continue;
                double best = 1e18, val = 0.0;
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        if (sparse.is_valid(yy, xx)) {
                            const double dist = (yy - y) * (yy - y) + (xx - x) * (xx - x);
                            if (dist < best) {
                                best = dist;
                                val = sparse.at(yy, xx);
                            }
                        }
                nn_fill.at(y, x) = val;
                nn_fill.set_valid(y, x, true);
            }
        const double e_sol = depth_energy(solution, sparse, n, b, wt, k);
        const double e_nn = depth_energy(nn_fill, sparse, n, b, wt, k);
        CHECK(e_sol <= e_nn + 1e-9);
    }
}

TEST_CASE("CG reports non-convergence with the residual") {
    DepthMap sparse(6, 6, 0.0, false);
    sparse.at(0, 0) = 1.0;
    sparse.set_valid(0, 0, true);
    sparse.at(5, 5) = 2.0;
    sparse.set_valid(5, 5, true);
    NormalMap n(6, 6);
    BoundaryMap b(6, 6, 1.0);
    OptimizeOptions opts;
    opts.cg_max_iter_factor = 0;  // no iterations allowed
    CHECK_THROWS_AS(global_optimize_depth(sparse, n, b, {1000.0, 1.0, 1.0},
                                          toy_intrinsics(6, 6), opts),
                    numeric_error);
    try {
        global_optimize_depth(sparse, n, b, {1000.0, 1.0, 1.0}, toy_intrinsics(6, 6), opts);
    } catch (const numeric_error& e) {
        CHECK(std::string(e.what()).find("residual") != std::string::npos);
    }
}
