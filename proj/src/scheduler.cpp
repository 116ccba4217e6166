// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/scheduler.hpp"

#include <cmath>
#include <string>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::diffusion {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw invalid_argument("make_schedule: T must be >= 1, got " + std::to_string(T));
    if (!(beta_start > 0.0 && beta_end < 1.0))
        throw invalid_argument("make_schedule: beta bounds must lie in (0,1)");
    if (beta_start > beta_end)
        throw invalid_argument("make_schedule: beta_start > beta_end");

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double beta =
            (T == 1) ? beta_start
                     : beta_start + (beta_end - beta_start) * static_cast<double>(t) / (T - 1);
        s.betas[t] = beta;
        s.alphas[t] = 1.0 - beta;
        prod *= s.alphas[t];
        s.alpha_bars[t] = prod;
    }
    return s;
}

namespace {
void check_shapes(const std::vector<double>& a, const std::vector<double>& b, const char* op) {
    if (a.size() != b.size())
        throw invalid_argument(std::string(op) + ": shape mismatch (" +
                               std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}
void check_t(int t, const NoiseSchedule& s, const char* op) {
    if (t < 0 || t >= s.T)
        throw invalid_argument(std::string(op) + ": timestep " + std::to_string(t) +
                               " out of range [0," + std::to_string(s.T - 1) + "]");
}
}  // namespace

std::vector<double> forward_sample(const std::vector<double>& x0, int t,
                                   const std::vector<double>& noise,
                                   const NoiseSchedule& schedule) {
    check_t(t, schedule, "forward_sample");
    check_shapes(x0, noise, "forward_sample");
    const double sa = std::sqrt(schedule.alpha_bars[t]);
    const double sn = std::sqrt(1.0 - schedule.alpha_bars[t]);
    std::vector<double> out(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) out[i] = sa * x0[i] + sn * noise[i];
    return out;
}

std::vector<double> forward_step(const std::vector<double>& x_prev, int t,
                                 const std::vector<double>& noise,
                                 const NoiseSchedule& schedule) {
    check_t(t, schedule, "forward_step");
    check_shapes(x_prev, noise, "forward_step");
    const double sa = std::sqrt(schedule.alphas[t]);
    const double sb = std::sqrt(schedule.betas[t]);
    std::vector<double> out(x_prev.size());
    for (size_t i = 0; i < x_prev.size(); ++i) out[i] = sa * x_prev[i] + sb * noise[i];
    return out;
}

std::vector<double> ddim_step(const std::vector<double>& x_t,
                              const std::vector<double>& pred, int t, int t_prev,
                              const NoiseSchedule& schedule) {
    check_t(t, schedule, "ddim_step");
    if (t_prev >= t)
        throw invalid_argument("ddim_step: t_prev must be < t");
    if (t_prev < -1)
        throw invalid_argument("ddim_step: t_prev out of range");
    check_shapes(x_t, pred, "ddim_step");

    if (t_prev == -1) return pred;  // clean endpoint, abar = 1

    const double abar_t = schedule.alpha_bars[t];
    if (abar_t >= 1.0)
        throw numeric_error("ddim_step: alpha_bar = 1 requires the t_prev = -1 endpoint");
    const double abar_p = schedule.alpha_bars[t_prev];
    const double sa_t = std::sqrt(abar_t);
    const double sn_t = std::sqrt(1.0 - abar_t);
    const double sa_p = std::sqrt(abar_p);
    const double sn_p = std::sqrt(1.0 - abar_p);

    std::vector<double> out(x_t.size());
    for (size_t i = 0; i < x_t.size(); ++i) {
        const double eps = (x_t[i] - sa_t * pred[i]) / sn_t;
        out[i] = sa_p * pred[i] + sn_p * eps;
    }
    return out;
}

TimestepPlan make_timestep_plan(int T, int count) {
    if (T < 1) throw invalid_argument("make_timestep_plan: T must be >= 1");
    if (count < 1 || count > T)
        throw invalid_argument("make_timestep_plan: count must lie in [1, T], got " +
                               std::to_string(count));
    TimestepPlan plan;
    plan.steps.resize(count);
    if (count == 1) {
        plan.steps[0] = 0;
        return plan;
    }
    for (int i = 0; i < count; ++i) {
        const double frac = static_cast<double>(count - 1 - i) / (count - 1);
        plan.steps[i] = static_cast<int>(std::lround(frac * (T - 1)));
    }
    return plan;
}

}  // namespace depthdiff::diffusion
