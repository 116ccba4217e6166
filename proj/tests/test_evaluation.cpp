// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/core/rng.hpp"
#include "depthdiff/evaluation.hpp"

using namespace depthdiff;
using namespace depthdiff::eval;

namespace {

// Naive double-loop oracle, written independently of MetricAccumulator.
MetricsReport oracle_metrics(const DepthMap& pred, const DepthMap& gt,
                             const TransparencyMask& mask, Scope scope) {
    double sum_sq = 0.0, sum_abs = 0.0, sum_rel = 0.0;
    long n = 0, a = 0, b = 0, c = 0;
    for (int y = 0; y < gt.h; ++y)
        for (int x = 0; x < gt.w; ++x) {
            if (scope == Scope::transparent_only && !mask.at(y, x)) continue;
            const double p = pred.at(y, x);
            const double g = gt.at(y, x);
            const double diff = p - g;
            sum_sq += diff * diff;
            sum_abs += std::abs(diff);
            sum_rel += std::abs(diff) / g;
            double ratio;
            if (p > 0.0)
                ratio = std::max(p / g, g / p);
            else
                ratio = std::numeric_limits<double>::infinity();
            if (ratio < 1.05) ++a;
            if (ratio < 1.10) ++b;
            if (ratio < 1.25) ++c;
            ++n;
        }
    MetricsReport r;
    r.scope = scope;
    r.pixel_count = n;
    r.rmse = std::sqrt(sum_sq / static_cast<double>(n));
    r.mae = sum_abs / static_cast<double>(n);
    r.rel = sum_rel / static_cast<double>(n);
    r.delta_105 = 100.0 * a / static_cast<double>(n);
    r.delta_110 = 100.0 * b / static_cast<double>(n);
    r.delta_125 = 100.0 * c / static_cast<double>(n);
    return r;
}

SceneSample make_sample(const std::string& id, int h, int w, double gt_value,
                        int masked_pixels) {
    SceneSample s;
    s.id = id;
    s.rgb = ImageRGB(h, w, 0.5);
    s.gt_depth = DepthMap(h, w, gt_value);
    s.raw_depth = s.gt_depth;
    s.mask = TransparencyMask(h, w, false);
    int placed = 0;
    for (int y = 0; y < h && placed < masked_pixels; ++y)
        for (int x = 0; x < w && placed < masked_pixels; ++x) {
            s.mask.set(y, x, true);
            ++placed;
        }
    return s;
}

}  // namespace

TEST_CASE("perfect prediction scores zero error and full deltas") {
    DepthMap gt(4, 4, 1.5);
    TransparencyMask mask(4, 4, true);
    const MetricsReport r = compute_metrics(gt, gt, mask, Scope::transparent_only);
    CHECK(r.rmse == 0.0);
    CHECK(r.rel == 0.0);
    CHECK(r.mae == 0.0);
    CHECK(r.delta_105 == 100.0);
    CHECK(r.delta_110 == 100.0);
    CHECK(r.delta_125 == 100.0);
    CHECK(r.pixel_count == 16);
}

TEST_CASE("uniform 10% overshoot hits the strict delta boundaries") {
    DepthMap gt(4, 4, 1.3);
    DepthMap pred(4, 4, 1.3 * 1.1);
    TransparencyMask mask(4, 4, true);
    const MetricsReport r = compute_metrics(pred, gt, mask, Scope::all_pixels);
    CHECK(r.rel == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.delta_105 == 0.0);
    CHECK(r.delta_110 == 0.0);  // ratio == 1.10 is not strictly less
    CHECK(r.delta_125 == 100.0);
}

TEST_CASE("constant offset on a 1m plane") {
    DepthMap gt(5, 5, 1.0);
    DepthMap pred(5, 5, 1.1);
    TransparencyMask mask(5, 5, false);
    const MetricsReport r = compute_metrics(pred, gt, mask, Scope::all_pixels);
    CHECK(r.rmse == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.mae == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(r.rel == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("errors: empty scope and non-positive ground truth") {
    DepthMap gt(3, 3, 1.0);
    TransparencyMask empty_mask(3, 3, false);
    CHECK_THROWS_AS(compute_metrics(gt, gt, empty_mask, Scope::transparent_only),
                    invalid_argument);
    DepthMap bad_gt(3, 3, 0.0);
    TransparencyMask all(3, 3, true);
    CHECK_THROWS_AS(compute_metrics(gt, bad_gt, all, Scope::transparent_only),
                    invalid_argument);
    DepthMap wrong(2, 3, 1.0);
    CHECK_THROWS_AS(compute_metrics(wrong, gt, all, Scope::transparent_only),
                    invalid_argument);
}

TEST_CASE("compute_metrics agrees exactly with the double-loop oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        DepthMap pred(8, 8), gt(8, 8);
        TransparencyMask mask(8, 8, false);
        for (int i = 0; i < 64; ++i) {
            gt.values[i] = rng.uniform(0.3, 2.0);
            pred.values[i] = rng.uniform() < 0.05 ? 0.0 : rng.uniform(0.3, 2.0);
            mask.mask[i] = rng.uniform() < 0.5 ? 1 : 0;
        }
        mask.mask[0] = 1;  // non-empty scope
        const Scope scope = trial % 2 ? Scope::transparent_only : Scope::all_pixels;
        const MetricsReport got = compute_metrics(pred, gt, mask, scope);
        const MetricsReport want = oracle_metrics(pred, gt, mask, scope);
        CHECK(got.rmse == want.rmse);
        CHECK(got.rel == want.rel);
        CHECK(got.mae == want.mae);
        CHECK(got.delta_105 == want.delta_105);
        CHECK(got.delta_110 == want.delta_110);
        CHECK(got.delta_125 == want.delta_125);
        CHECK(got.pixel_count == want.pixel_count);
        // delta monotonicity on every report
        CHECK(got.delta_105 <= got.delta_110);
        CHECK(got.delta_110 <= got.delta_125);
        CHECK(got.rmse >= got.mae);
    }
}

TEST_CASE("metrics are invariant under a joint pixel permutation") {
    Rng rng(23);
    DepthMap pred(6, 6), gt(6, 6);
    TransparencyMask mask(6, 6, false);
    for (int i = 0; i < 36; ++i) {
        gt.values[i] = rng.uniform(0.5, 2.0);
        pred.values[i] = rng.uniform(0.5, 2.0);
        mask.mask[i] = rng.uniform() < 0.6;
    }
    mask.mask[3] = 1;
    std::vector<size_t> perm(36);
    for (size_t i = 0; i < 36; ++i) perm[i] = i;
    for (size_t i = 36; i > 1; --i)
        std::swap(perm[i - 1], perm[static_cast<size_t>(rng.uniform_int(0, i - 1))]);
    DepthMap pred_p(6, 6), gt_p(6, 6);
    TransparencyMask mask_p(6, 6, false);
    for (size_t i = 0; i < 36; ++i) {
        pred_p.values[i] = pred.values[perm[i]];
        gt_p.values[i] = gt.values[perm[i]];
        mask_p.mask[i] = mask.mask[perm[i]];
    }
    const auto a = compute_metrics(pred, gt, mask, Scope::transparent_only);
    const auto b = compute_metrics(pred_p, gt_p, mask_p, Scope::transparent_only);
    CHECK(a.rmse == doctest::Approx(b.rmse).epsilon(1e-12));
    CHECK(a.rel == doctest::Approx(b.rel).epsilon(1e-12));
    CHECK(a.mae == doctest::Approx(b.mae).epsilon(1e-12));
    CHECK(a.delta_105 == b.delta_105);
}

TEST_CASE("benchmark aggregates pool pixel-weighted squared errors") {
    // Two samples with equal pixel counts, per-sample rmse 0 and 0.2:
    // pooled rmse = sqrt(0.02).
    std::vector<SceneSample> samples = {make_sample("a", 4, 4, 1.0, 8),
                                        make_sample("b", 4, 4, 1.0, 8)};
    auto loader = [&](const std::string& id) { return id == "a" ? samples[0] : samples[1]; };
    auto pipeline = [](const SceneSample& s) {
        DepthMap pred = s.gt_depth;
        if (s.id == "b")
            for (auto& v : pred.values) v += 0.2;
        return pred;
    };
    const auto result = run_benchmark({"a", "b"}, loader, pipeline,
                                      Scope::transparent_only, Aggregate::pixel_weighted);
    CHECK(result.per_sample.size() == 2);
    CHECK(result.per_sample[0].metrics.rmse == 0.0);
    CHECK(result.per_sample[1].metrics.rmse == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(result.aggregate.rmse == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));
    CHECK(result.aggregate.rmse == doctest::Approx(0.1414).epsilon(1e-3));

    // Pooled rmse^2 equals the pixel-weighted mean of per-sample MSEs.
    double weighted = 0.0;
    int64_t total = 0;
    for (const auto& sm : result.per_sample) {
        weighted += sm.metrics.rmse * sm.metrics.rmse * sm.metrics.pixel_count;
        total += sm.metrics.pixel_count;
    }
    CHECK(result.aggregate.rmse ==
          doctest::Approx(std::sqrt(weighted / total)).epsilon(1e-12));
}

TEST_CASE("single perfect sample aggregates to zeros") {
    auto sample = make_sample("only", 4, 4, 1.2, 5);
    const auto result = run_benchmark(
        {"only"}, [&](const std::string&) { return sample; },
        [](const SceneSample& s) { return s.gt_depth; }, Scope::transparent_only,
        Aggregate::pixel_weighted);
    CHECK(result.aggregate.rmse == 0.0);
    CHECK(result.aggregate.delta_125 == 100.0);
}

TEST_CASE("failed samples are recorded and excluded") {
    auto sample = make_sample("x", 4, 4, 1.0, 4);
    int called = 0;
    const auto result = run_benchmark(
        {"ok1", "bad", "ok2"},
        [&](const std::string& id) {
            auto s = sample;
            s.id = id;
            return s;
        },
        [&](const SceneSample& s) -> DepthMap {
            ++called;
            if (s.id == "bad") throw numeric_error("synthetic failure");
            return s.gt_depth;
        },
        Scope::transparent_only, Aggregate::pixel_weighted);
    CHECK(called == 3);
    CHECK(result.per_sample.size() == 2);
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].find("bad") != std::string::npos);
    CHECK(result.failure_fraction() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("reports serialize to parseable json and aligned tables") {
    auto sample = make_sample("s", 4, 4, 1.0, 6);
    const auto result = run_benchmark(
        {"s"}, [&](const std::string&) { return sample; },
        [](const SceneSample& s) { return s.gt_depth; }, Scope::transparent_only,
        Aggregate::pixel_weighted);
    const auto parsed = nlohmann::json::parse(benchmark_json(result));
    CHECK(parsed.at("schema") == "depthdiff.benchmark.v1");
    CHECK(parsed.at("aggregate").at("rmse") == 0.0);
    CHECK(parsed.at("per_sample").size() == 1);

    const std::string table = benchmark_table("unit", result);
    CHECK(table.find("RMSE") != std::string::npos);
    CHECK(table.find("aggregate") != std::string::npos);

    std::vector<AblationRow> rows = {{"t=20", "", result.aggregate},
                                     {"t=5", "reuse", result.aggregate}};
    const std::string ab = ablation_table("ablation", rows);
    CHECK(ab.find("t=20") != std::string::npos);
    CHECK(ab.find("--- reuse ---") != std::string::npos);
    const auto ab_json = nlohmann::json::parse(ablation_json("steps", rows));
    CHECK(ab_json.at("rows").size() == 2);
}

TEST_CASE("per-sample aggregation averages sample metrics") {
    std::vector<SceneSample> samples = {make_sample("a", 4, 4, 1.0, 16),
                                        make_sample("b", 4, 4, 1.0, 4)};
    auto loader = [&](const std::string& id) { return id == "a" ? samples[0] : samples[1]; };
    auto pipeline = [](const SceneSample& s) {
        DepthMap pred = s.gt_depth;
        if (s.id == "b")
            for (auto& v : pred.values) v += 0.1;
        return pred;
    };
    const auto result = run_benchmark({"a", "b"}, loader, pipeline, Scope::transparent_only,
                                      Aggregate::per_sample);
    CHECK(result.aggregate.rmse == doctest::Approx(0.05).epsilon(1e-12));
}
