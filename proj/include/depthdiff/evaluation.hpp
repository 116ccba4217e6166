// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "depthdiff/core/config.hpp"
#include "depthdiff/core/types.hpp"

namespace depthdiff::eval {

enum class Scope { transparent_only, all_pixels };
enum class Aggregate { pixel_weighted, per_sample };

Scope parse_scope(const std::string& name);
Aggregate parse_aggregate(const std::string& name);
const char* scope_name(Scope scope);

/// Depth-completion metrics over one pixel set. rmse/mae in meters, rel
/// dimensionless, deltas in percent. delta thresholds use the strict
/// condition max(d/d*, d*/d) < delta.
struct MetricsReport {
    double rmse = 0.0;
    double rel = 0.0;
    double mae = 0.0;
    double delta_105 = 0.0;
    double delta_110 = 0.0;
    double delta_125 = 0.0;
    int64_t pixel_count = 0;
    Scope scope = Scope::transparent_only;
};

/// Streaming pixel accumulator; pooled accumulators implement the
/// pixel-weighted benchmark aggregate.
struct MetricAccumulator {
    int64_t n = 0;
    double sum_sq = 0.0;
    double sum_abs = 0.0;
    double sum_rel = 0.0;
    int64_t n_105 = 0, n_110 = 0, n_125 = 0;

    void add_pixel(double pred, double gt);
    void merge(const MetricAccumulator& other);
    MetricsReport report(Scope scope) const;
};

/// Metrics over the scoped pixel set. Throws on shape mismatch, an empty
/// scope, or a non-positive ground-truth pixel in scope. Invalid prediction
/// pixels evaluate at their stored value (0 for sensor dropouts).
MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                              const TransparencyMask& mask, Scope scope);

struct SampleMetrics {
    std::string id;
    MetricsReport metrics;
    MetricAccumulator accumulator;
};

struct BenchmarkResult {
    std::vector<SampleMetrics> per_sample;
    MetricsReport aggregate;
    Aggregate aggregate_mode = Aggregate::pixel_weighted;
    std::vector<std::string> failures;  // "id: message"
    int total_samples = 0;

    double failure_fraction() const {
        return total_samples == 0 ? 0.0
                                  : static_cast<double>(failures.size()) / total_samples;
    }
};

/// Runs the pipeline over a split and aggregates metrics. Per-sample
/// failures are recorded and excluded from the aggregate.
BenchmarkResult run_benchmark(const std::vector<std::string>& ids,
                              const std::function<SceneSample(const std::string&)>& loader,
                              const std::function<DepthMap(const SceneSample&)>& pipeline,
                              Scope scope, Aggregate aggregate);

/// Machine-readable report (file format documented in docs/FORMATS.md).
std::string benchmark_json(const BenchmarkResult& result);

/// Aligned table in the benchmark column order:
/// RMSE, REL, MAE, d1.05, d1.10, d1.25.
std::string benchmark_table(const std::string& title, const BenchmarkResult& result);

/// One row of an ablation table.
struct AblationRow {
    std::string label;    // e.g. "t=20" or "refined"
    std::string section;  // grouping header, may be empty
    MetricsReport metrics;
};

/// Ablation tables use the column order REL, RMSE, MAE, d1.05, d1.10, d1.25.
std::string ablation_table(const std::string& title, const std::vector<AblationRow>& rows);
std::string ablation_json(const std::string& name, const std::vector<AblationRow>& rows);

/// Inference-step ablation over a test split: a baseline row at the base
/// checkpoint's configured step count, a reuse row per count (base
/// checkpoint, changed plan) and, when retrain checkpoints are supplied, a
/// retrain row per count. Retrain checkpoints must have been trained with
/// train.on_plan = true at the matching step count; a missing checkpoint
/// for a requested cell is an error.
std::vector<AblationRow> ablate_inference_steps(
    const std::filesystem::path& corpus_root, const std::string& split,
    const std::filesystem::path& codec_ckpt, const std::filesystem::path& base_ckpt,
    const std::vector<int>& counts,
    const std::map<int, std::filesystem::path>& retrain_ckpts, Scope scope,
    Aggregate aggregate, uint64_t seed);

/// Conditioning ablation: refined-condition checkpoint versus rgb-only
/// checkpoint, trained identically except for the conditioning inputs. Any
/// other config difference between the two checkpoints is an error.
std::vector<AblationRow> ablate_condition(const std::filesystem::path& corpus_root,
                                          const std::string& split,
                                          const std::filesystem::path& codec_ckpt,
                                          const std::filesystem::path& refined_ckpt,
                                          const std::filesystem::path& rgb_only_ckpt,
                                          Scope scope, Aggregate aggregate, uint64_t seed);

}  // namespace depthdiff::eval
