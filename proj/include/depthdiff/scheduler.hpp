// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

namespace depthdiff::diffusion {

/// Noise schedule for the forward process q(x_t | x_0) = N(sqrt(abar_t) x_0,
/// (1 - abar_t) I), with abar_t the cumulative product of alpha_s = 1 - beta_s.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;       // size T, each in (0,1)
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // cumulative products, strictly decreasing
};

/// Strictly decreasing inference-step subsequence of [0, T-1] ending at 0.
struct TimestepPlan {
    std::vector<int> steps;
    int count() const { return static_cast<int>(steps.size()); }
};

/// Builds a schedule with betas linearly interpolated from beta_start to
/// beta_end inclusive. Requires T >= 1 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

/// Closed-form forward marginal: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise.
/// Noise is injected by the caller.
std::vector<double> forward_sample(const std::vector<double>& x0, int t,
                                   const std::vector<double>& noise,
                                   const NoiseSchedule& schedule);

/// Single forward transition q(x_t | x_{t-1}): sqrt(alpha_t) * x_prev +
/// sqrt(beta_t) * noise. Reference path for the marginal-composition check;
/// not part of inference.
std::vector<double> forward_step(const std::vector<double>& x_prev, int t,
                                 const std::vector<double>& noise,
                                 const NoiseSchedule& schedule);

/// Deterministic DDIM reverse step with the transition variance set to zero.
/// `pred` is the model's estimate of the clean latent x_0. Computes the
/// implied noise eps = (x_t - sqrt(abar_t) pred) / sqrt(1 - abar_t) and
/// returns sqrt(abar_prev) pred + sqrt(1 - abar_prev) eps. t_prev = -1
/// denotes the clean endpoint (abar = 1), where the result is pred exactly.
std::vector<double> ddim_step(const std::vector<double>& x_t,
                              const std::vector<double>& pred, int t, int t_prev,
                              const NoiseSchedule& schedule);

/// Evenly spaced strictly decreasing subsequence of [0, T-1] with `count`
/// entries, last entry 0. Requires 1 <= count <= T.
TimestepPlan make_timestep_plan(int T, int count);

}  // namespace depthdiff::diffusion
