// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::eval {

Scope parse_scope(const std::string& name) {
    if (name == "transparent_only") return Scope::transparent_only;
    if (name == "all_pixels") return Scope::all_pixels;
    throw invalid_argument("unknown eval scope '" + name +
                           "' (expected transparent_only|all_pixels)");
}

Aggregate parse_aggregate(const std::string& name) {
    if (name == "pixel_weighted") return Aggregate::pixel_weighted;
    if (name == "per_sample") return Aggregate::per_sample;
    throw invalid_argument("unknown aggregate mode '" + name +
                           "' (expected pixel_weighted|per_sample)");
}

const char* scope_name(Scope scope) {
    return scope == Scope::transparent_only ? "transparent_only" : "all_pixels";
}

void MetricAccumulator::add_pixel(double pred, double gt) {
    const double diff = pred - gt;
    sum_sq += diff * diff;
    sum_abs += std::abs(diff);
    sum_rel += std::abs(diff) / gt;
    const double ratio = pred > 0.0 ? std::max(pred / gt, gt / pred)
                                    : std::numeric_limits<double>::infinity();
    if (ratio < 1.05) ++n_105;
    if (ratio < 1.10) ++n_110;
    if (ratio < 1.25) ++n_125;
    ++n;
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
    n += other.n;
    sum_sq += other.sum_sq;
    sum_abs += other.sum_abs;
    sum_rel += other.sum_rel;
    n_105 += other.n_105;
    n_110 += other.n_110;
    n_125 += other.n_125;
}

MetricsReport MetricAccumulator::report(Scope scope) const {
    if (n == 0) throw invalid_argument("metrics: empty evaluation set");
    MetricsReport r;
    r.scope = scope;
    r.pixel_count = n;
    const double dn = static_cast<double>(n);
    r.rmse = std::sqrt(sum_sq / dn);
    r.mae = sum_abs / dn;
    r.rel = sum_rel / dn;
    r.delta_105 = 100.0 * n_105 / dn;
    r.delta_110 = 100.0 * n_110 / dn;
    r.delta_125 = 100.0 * n_125 / dn;
    // Construction-time invariants (tiny slack: rmse == mae for constant
    // residuals up to rounding).
    if (!(r.delta_105 <= r.delta_110 && r.delta_110 <= r.delta_125))
        throw numeric_error("metrics: delta monotonicity violated");
    if (!(r.rmse >= r.mae - 1e-12 * std::max(1.0, r.mae) && r.mae >= 0.0))
        throw numeric_error("metrics: rmse/mae ordering violated");
    return r;
}

MetricsReport compute_metrics(const DepthMap& pred, const DepthMap& gt,
                              const TransparencyMask& mask, Scope scope) {
    if (pred.h != gt.h || pred.w != gt.w || mask.h != gt.h || mask.w != gt.w)
        throw invalid_argument("compute_metrics: shape mismatch");
    MetricAccumulator acc;
    for (int y = 0; y < gt.h; ++y)
        for (int x = 0; x < gt.w; ++x) {
            if (scope == Scope::transparent_only && !mask.at(y, x)) continue;
            const double g = gt.at(y, x);
            if (!(g > 0.0))
                throw invalid_argument("compute_metrics: non-positive ground truth at (" +
                                       std::to_string(y) + "," + std::to_string(x) + ")");
            acc.add_pixel(pred.at(y, x), g);
        }
    return acc.report(scope);
}

BenchmarkResult run_benchmark(const std::vector<std::string>& ids,
                              const std::function<SceneSample(const std::string&)>& loader,
                              const std::function<DepthMap(const SceneSample&)>& pipeline,
                              Scope scope, Aggregate aggregate) {
    if (ids.empty()) throw invalid_argument("run_benchmark: empty split");
    BenchmarkResult result;
    result.aggregate_mode = aggregate;
    result.total_samples = static_cast<int>(ids.size());

    MetricAccumulator pooled;
    MetricsReport mean_report;
    for (const auto& id : ids) {
        try {
            const SceneSample sample = loader(id);
            const DepthMap predicted = pipeline(sample);

            SampleMetrics sm;
            sm.id = id;
            MetricAccumulator acc;
            for (int y = 0; y < sample.gt_depth.h; ++y)
                for (int x = 0; x < sample.gt_depth.w; ++x) {
                    if (scope == Scope::transparent_only && !sample.mask.at(y, x)) continue;
                    const double g = sample.gt_depth.at(y, x);
                    if (!(g > 0.0))
                        throw invalid_argument("non-positive ground truth in scope");
                    acc.add_pixel(predicted.at(y, x), g);
                }
            sm.accumulator = acc;
            sm.metrics = acc.report(scope);
            pooled.merge(acc);
            result.per_sample.push_back(std::move(sm));
        } catch (const std::exception& e) {
            result.failures.push_back(id + ": " + e.what());
        }
    }
    if (result.per_sample.empty())
        throw numeric_error("run_benchmark: every sample failed");

    if (aggregate == Aggregate::pixel_weighted) {
        result.aggregate = pooled.report(scope);
    } else {
        MetricsReport m;
        m.scope = scope;
        const double k = static_cast<double>(result.per_sample.size());
        for (const auto& sm : result.per_sample) {
            m.rmse += sm.metrics.rmse / k;
            m.rel += sm.metrics.rel / k;
            m.mae += sm.metrics.mae / k;
            m.delta_105 += sm.metrics.delta_105 / k;
            m.delta_110 += sm.metrics.delta_110 / k;
            m.delta_125 += sm.metrics.delta_125 / k;
            m.pixel_count += sm.metrics.pixel_count;
        }
        result.aggregate = m;
    }
    return result;
}

namespace {
nlohmann::json metrics_json(const MetricsReport& m) {
    return {{"rmse", m.rmse},           {"rel", m.rel},
            {"mae", m.mae},             {"delta_1.05", m.delta_105},
            {"delta_1.10", m.delta_110}, {"delta_1.25", m.delta_125},
            {"pixel_count", m.pixel_count}, {"scope", scope_name(m.scope)}};
}

std::string metrics_row(const MetricsReport& m, bool rel_first) {
    char buf[160];
    if (rel_first)
        std::snprintf(buf, sizeof(buf), "%8.4f %8.4f %8.4f %9.2f %9.2f %9.2f", m.rel, m.rmse,
                      m.mae, m.delta_105, m.delta_110, m.delta_125);
    else
        std::snprintf(buf, sizeof(buf), "%8.4f %8.4f %8.4f %9.2f %9.2f %9.2f", m.rmse, m.rel,
                      m.mae, m.delta_105, m.delta_110, m.delta_125);
    return buf;
}
}  // namespace

std::string benchmark_json(const BenchmarkResult& result) {
    nlohmann::json j;
    j["schema"] = "depthdiff.benchmark.v1";
    j["aggregate_mode"] =
        result.aggregate_mode == Aggregate::pixel_weighted ? "pixel_weighted" : "per_sample";
    j["aggregate"] = metrics_json(result.aggregate);
    auto& per = j["per_sample"] = nlohmann::json::array();
    for (const auto& sm : result.per_sample) {
        auto entry = metrics_json(sm.metrics);
        entry["id"] = sm.id;
        per.push_back(entry);
    }
    j["failures"] = result.failures;
    j["total_samples"] = result.total_samples;
    return j.dump(2);
}

std::string benchmark_table(const std::string& title, const BenchmarkResult& result) {
    std::ostringstream os;
    os << title << " (scope: " << scope_name(result.aggregate.scope)
       << ", pixels: " << result.aggregate.pixel_count << ")\n";
    os << "                    RMSE      REL      MAE     d1.05     d1.10     d1.25\n";
    char label[32];
    std::snprintf(label, sizeof(label), "%-18s", "aggregate");
    os << label << metrics_row(result.aggregate, false) << "\n";
    if (!result.failures.empty())
        os << "failures: " << result.failures.size() << "/" << result.total_samples << "\n";
    return os.str();
}

std::string ablation_table(const std::string& title, const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << title << "\n";
    os << "Method                REL     RMSE      MAE     d1.05     d1.10     d1.25\n";
    std::string current_section;
    for (const auto& row : rows) {
        if (row.section != current_section) {
            current_section = row.section;
            if (!current_section.empty()) os << "--- " << current_section << " ---\n";
        }
        char label[32];
        std::snprintf(label, sizeof(label), "%-18s", row.label.c_str());
        os << label << metrics_row(row.metrics, true) << "\n";
    }
    return os.str();
}

std::string ablation_json(const std::string& name, const std::vector<AblationRow>& rows) {
    nlohmann::json j;
    j["schema"] = "depthdiff.ablation.v1";
    j["name"] = name;
    auto& out = j["rows"] = nlohmann::json::array();
    for (const auto& row : rows) {
        auto entry = metrics_json(row.metrics);
        entry["label"] = row.label;
        entry["section"] = row.section;
        out.push_back(entry);
    }
    return j.dump(2);
}

}  // namespace depthdiff::eval
