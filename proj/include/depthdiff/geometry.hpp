// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "depthdiff/core/types.hpp"

namespace depthdiff::geo {

/// Copy of `raw` with validity cleared at every masked pixel. Values are
/// left untouched elsewhere.
DepthMap mask_invalid_depth(const DepthMap& raw, const TransparencyMask& mask);

/// Per-pixel normals from cross products of central-difference 3D tangent
/// vectors (one-sided at borders), normalized, z pointing toward the camera.
/// Degenerate tangents fall back to (0, 0, -1).
NormalMap normals_from_depth(const DepthMap& depth, const CameraIntrinsics& intrinsics);

/// Weight 0 where the max absolute depth difference to any valid unmasked
/// 4-neighbor exceeds `threshold`, else 1. Pixels that are invalid, masked,
/// or have no valid neighbors get weight 1.
BoundaryMap detect_boundaries(const DepthMap& depth, double threshold,
                              const TransparencyMask& mask);

struct OptimizeWeights {
    double w_obs = 1000.0;
    double w_normal = 1.0;
    double w_smooth = 1.0;
};

struct OptimizeOptions {
    double cg_tol = 1e-8;        // relative residual target
    int cg_max_iter_factor = 10; // max iterations = factor * H * W
};

/// Quadratic energy of a candidate depth map D:
///   E = w_obs   * sum_{valid p} (D_p - obs_p)^2
///     + w_normal* sum_{edges}  b_pq * (n_pq . t_pq(D))^2
///     + w_smooth* sum_{edges}  b_pq * (D_p - D_q)^2
/// where edges are 4-neighbor pairs, b_pq is the product of the endpoint
/// boundary weights, n_pq the mean endpoint normal, and t_pq the 3D tangent
/// from p to q written as a linear function of the two depths.
double depth_energy(const DepthMap& candidate, const DepthMap& sparse,
                    const NormalMap& normals, const BoundaryMap& boundaries,
                    const OptimizeWeights& weights, const CameraIntrinsics& intrinsics);

/// Minimizes depth_energy over all H*W unknowns: one sparse SPD linear
/// system solved by Jacobi-preconditioned conjugate gradients. Requires at
/// least one valid observation. The result has validity all true.
/// Internally solves in a canonical orientation (H <= W) so that transposed
/// inputs produce exactly transposed outputs.
DepthMap global_optimize_depth(const DepthMap& sparse, const NormalMap& normals,
                               const BoundaryMap& boundaries, const OptimizeWeights& weights,
                               const CameraIntrinsics& intrinsics,
                               const OptimizeOptions& options = {});

}  // namespace depthdiff::geo
