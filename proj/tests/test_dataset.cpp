// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/core/rng.hpp"
#include "depthdiff/dataset.hpp"
#include "depthdiff/io/image_io.hpp"

using namespace depthdiff;
using namespace depthdiff::data;
namespace fs = std::filesystem;

namespace {

SynthSpec small_spec() {
    SynthSpec s;
    s.width = 32;
    s.height = 24;
    s.objects_min = 1;
    s.objects_max = 3;
    return s;
}

fs::path fresh_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

uint64_t hash_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return Rng::hash_bytes(bytes.data(), bytes.size());
}

}  // namespace

TEST_CASE("scene without objects is uncorrupted") {
    SynthSpec spec = small_spec();
    spec.objects_min = 0;
    spec.objects_max = 0;
    Rng rng(1);
    const SceneSample s = generate_scene(spec, rng, "t");
    for (size_t i = 0; i < s.mask.mask.size(); ++i) CHECK(s.mask.mask[i] == 0);
    CHECK(s.raw_depth.values == s.gt_depth.values);
    CHECK(s.raw_depth.valid == s.gt_depth.valid);
}

TEST_CASE("full dropout leaves no valid raw depth inside the mask") {
    SynthSpec spec = small_spec();
    spec.hole_prob = 1.0;
    Rng rng(2);
    const SceneSample s = generate_scene(spec, rng, "t");
    int masked = 0;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (s.mask.at(y, x)) {
                ++masked;
                CHECK_FALSE(s.raw_depth.is_valid(y, x));
                CHECK(s.raw_depth.at(y, x) == 0.0);
            }
    CHECK(masked > 0);
}

TEST_CASE("raw equals ground truth outside the mask, exactly") {
    SynthSpec spec = small_spec();
    Rng rng(3);
    const SceneSample s = generate_scene(spec, rng, "t");
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (!s.mask.at(y, x)) {
                CHECK(s.raw_depth.at(y, x) == s.gt_depth.at(y, x));
                CHECK(s.raw_depth.is_valid(y, x));
            }
}

TEST_CASE("derived side information satisfies its invariants") {
    SynthSpec spec = small_spec();
    Rng rng(4);
    const SceneSample s = generate_scene(spec, rng, "t");
    for (size_t i = 0; i < s.normals.nx.size(); ++i) {
        const double len = std::sqrt(s.normals.nx[i] * s.normals.nx[i] +
                                     s.normals.ny[i] * s.normals.ny[i] +
                                     s.normals.nz[i] * s.normals.nz[i]);
        CHECK(std::abs(len - 1.0) <= 1e-6);
    }
    for (double w : s.boundaries.weights) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
    }
    for (double v : s.rgb.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("fixed seed reproduces a scene bit for bit") {
    const SynthSpec spec = small_spec();
    Rng a(42), b(42);
    const SceneSample sa = generate_scene(spec, a, "t");
    const SceneSample sb = generate_scene(spec, b, "t");
    CHECK(sa.gt_depth.values == sb.gt_depth.values);
    CHECK(sa.raw_depth.values == sb.raw_depth.values);
    CHECK(sa.rgb.data == sb.rgb.data);
    CHECK(sa.mask.mask == sb.mask.mask);
}

TEST_CASE("save then load round-trips within quantization") {
    const SynthSpec spec = small_spec();
    Rng rng(5);
    const SceneSample s = generate_scene(spec, rng, "roundtrip");
    const fs::path dir = fresh_dir("dd_roundtrip");
    save_sample(dir / "s0", s, spec_hash(spec));
    const SceneSample r = load_sample(dir, DatasetKind::synthetic, "s0");

    REQUIRE(r.gt_depth.h == s.gt_depth.h);
    for (size_t i = 0; i < s.gt_depth.size(); ++i) {
        CHECK(std::abs(r.gt_depth.values[i] - s.gt_depth.values[i]) <= 5.1e-4);
        CHECK(r.raw_depth.valid[i] == s.raw_depth.valid[i]);
        if (s.raw_depth.valid[i])
            CHECK(std::abs(r.raw_depth.values[i] - s.raw_depth.values[i]) <= 5.1e-4);
    }
    CHECK(r.mask.mask == s.mask.mask);
    for (size_t i = 0; i < s.rgb.data.size(); ++i)
        CHECK(std::abs(r.rgb.data[i] - s.rgb.data[i]) <= 0.5 / 255.0 + 1e-12);
    CHECK(r.intrinsics.fx == doctest::Approx(s.intrinsics.fx).epsilon(1e-12));
    fs::remove_all(dir);
}

TEST_CASE("all-zero depth file loads as fully invalid") {
    const fs::path dir = fresh_dir("dd_zerodepth");
    DepthMap zeros(8, 8, 0.0, false);
    io::save_depth_png(dir / "z.png", zeros);
    const DepthMap r = io::load_depth_png(dir / "z.png");
    for (uint8_t v : r.valid) CHECK(v == 0);
    fs::remove_all(dir);
}

TEST_CASE("area resampling matches a reference block mean at integer factors") {
    Rng rng(6);
    const int sh = 20, sw = 30, factor = 5;
    std::vector<double> src(sh * sw);
    for (auto& v : src) v = rng.uniform();
    const auto out = resample_area(src, sh, sw, sh / factor, sw / factor);
    for (int y = 0; y < sh / factor; ++y)
        for (int x = 0; x < sw / factor; ++x) {
            double mean = 0.0;
            for (int yy = 0; yy < factor; ++yy)
                for (int xx = 0; xx < factor; ++xx)
                    mean += src[(y * factor + yy) * sw + (x * factor + xx)];
            mean /= factor * factor;
            CHECK(out[y * (sw / factor) + x] == doctest::Approx(mean).epsilon(1e-12));
        }
}

TEST_CASE("depth resampling averages only valid pixels") {
    DepthMap src(4, 4, 2.0);
    src.set_valid(0, 0, false);
    src.at(0, 0) = 0.0;  // must not drag the mean down
    const DepthMap out = resample_depth_area(src, 2, 2);
    CHECK(out.at(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out.is_valid(0, 0));

    DepthMap hole(4, 4, 0.0, false);
    const DepthMap empty = resample_depth_area(hole, 2, 2);
    for (uint8_t v : empty.valid) CHECK(v == 0);
}

TEST_CASE("loading at a reduced resolution matches reference resampling") {
    SynthSpec spec;
    spec.width = 320;
    spec.height = 240;
    spec.objects_min = 2;
    spec.objects_max = 3;
    spec.focal = 350.0;
    Rng rng(7);
    const SceneSample big = generate_scene(spec, rng, "big");
    const fs::path dir = fresh_dir("dd_resample");
    save_sample(dir / "big", big, spec_hash(spec));

    const SceneSample native = load_sample(dir, DatasetKind::synthetic, "big");
    const SceneSample small = load_sample(dir, DatasetKind::synthetic, "big", 64, 48);
    CHECK(small.rgb.w == 64);
    CHECK(small.rgb.h == 48);

    // Reference: resample the natively loaded planes.
    const auto ref_gt = resample_depth_area(native.gt_depth, 48, 64);
    for (size_t i = 0; i < small.gt_depth.size(); ++i)
        CHECK(small.gt_depth.values[i] == doctest::Approx(ref_gt.values[i]).epsilon(1e-12));
    const auto ref_mask = resample_mask_nearest(native.mask, 48, 64);
    CHECK(small.mask.mask == ref_mask.mask);
    std::vector<double> plane(native.rgb.data.begin(),
                              native.rgb.data.begin() + 240 * 320);
    const auto ref_r = resample_area(plane, 240, 320, 48, 64);
    for (int i = 0; i < 48 * 64; ++i)
        CHECK(small.rgb.data[i] == doctest::Approx(ref_r[i]).epsilon(1e-12));
    // Intrinsics rescale with the resolution.
    CHECK(small.intrinsics.fx == doctest::Approx(native.intrinsics.fx * 64.0 / 320.0));
    fs::remove_all(dir);
}

TEST_CASE("alternate directory layouts load through the same decoder") {
    const SynthSpec spec = small_spec();
    Rng rng(8);
    const SceneSample s = generate_scene(spec, rng, "kind");
    const fs::path dir = fresh_dir("dd_kinds");

    // cleargrasp-style flat layout
    io::save_rgb_png(dir / "000001-rgb.png", s.rgb);
    io::save_depth_png(dir / "000001-transparent-depth.png", s.raw_depth);
    io::save_depth_png(dir / "000001-opaque-depth.png", s.gt_depth);
    io::save_mask_png(dir / "000001-mask.png", s.mask);
    const SceneSample cg = load_sample(dir, DatasetKind::cleargrasp, "000001");
    CHECK(cg.mask.mask == s.mask.mask);
    CHECK(cg.gt_depth.h == s.gt_depth.h);

    // transcg-style per-frame directory
    fs::create_directories(dir / "scene7");
    io::save_rgb_png(dir / "scene7" / "rgb1.png", s.rgb);
    io::save_depth_png(dir / "scene7" / "depth1.png", s.raw_depth);
    io::save_depth_png(dir / "scene7" / "depth1_gt.png", s.gt_depth);
    io::save_mask_png(dir / "scene7" / "depth1_gt_mask.png", s.mask);
    const SceneSample tc = load_sample(dir, DatasetKind::transcg, "scene7");
    CHECK(tc.mask.mask == s.mask.mask);

    CHECK_THROWS_AS(load_sample(dir, DatasetKind::synthetic, "missing"), input_error);
    fs::remove_all(dir);
}

TEST_CASE("split is deterministic, disjoint, and exhaustive") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("id" + std::to_string(i));

    const SplitIds all_train = split(ids, 1.0, 0.0, 0.0, 3);
    CHECK(all_train.train.size() == 100);
    CHECK(all_train.val.empty());
    CHECK(all_train.test.empty());

    const SplitIds a = split(ids, 0.8, 0.1, 0.1, 7);
    const SplitIds b = split(ids, 0.8, 0.1, 0.1, 7);
    CHECK(a.train == b.train);
    CHECK(a.val == b.val);
    CHECK(a.test == b.test);
    CHECK(a.train.size() == 80);
    CHECK(a.val.size() == 10);
    CHECK(a.test.size() == 10);

    std::vector<std::string> joined = a.train;
    joined.insert(joined.end(), a.val.begin(), a.val.end());
    joined.insert(joined.end(), a.test.begin(), a.test.end());
    std::sort(joined.begin(), joined.end());
    std::vector<std::string> sorted_ids = ids;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    CHECK(joined == sorted_ids);

    CHECK_THROWS_AS(split({}, 1.0, 0.0, 0.0, 1), invalid_argument);
    CHECK_THROWS_AS(split(ids, 0.5, 0.1, 0.1, 1), invalid_argument);
}

TEST_CASE("corpus generation is deterministic to the byte") {
    SynthSpec spec = small_spec();
    const fs::path d1 = fresh_dir("dd_corpus1");
    const fs::path d2 = fresh_dir("dd_corpus2");
    generate_corpus(d1, spec, 3, 1, 1, 99);
    generate_corpus(d2, spec, 3, 1, 1, 99);
    for (const char* split_name : {"train", "val", "test"}) {
        const auto ids = list_corpus_ids(d1, split_name);
        CHECK(ids == list_corpus_ids(d2, split_name));
        for (const auto& id : ids)
            for (const char* file :
                 {"rgb.png", "depth_raw.png", "depth_gt.png", "mask.png", "meta.txt"})
                CHECK(hash_file(d1 / split_name / id / file) ==
                      hash_file(d2 / split_name / id / file));
    }
    CHECK(list_corpus_ids(d1, "train").size() == 3);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("spec validation") {
    SynthSpec bad = small_spec();
    bad.width = 30;  // not divisible by 4
    CHECK_THROWS_AS(bad.validate(), invalid_argument);
    Rng rng(1);
    CHECK_THROWS_AS(generate_scene(bad, rng, "x"), invalid_argument);
    bad = small_spec();
    bad.hole_prob = 1.5;
    CHECK_THROWS_AS(bad.validate(), invalid_argument);
    bad = small_spec();
    bad.table_depth_max = bad.table_depth_min;
    CHECK_THROWS_AS(bad.validate(), invalid_argument);
}

TEST_CASE("float container round-trips exactly at float32 precision") {
    const fs::path dir = fresh_dir("dd_ddf");
    std::vector<double> planes(2 * 3 * 4);
    Rng rng(9);
    for (auto& v : planes) v = static_cast<float>(rng.normal());  // representable
    io::save_float_container(dir / "t.ddf", 3, 4, 2, planes);
    int h = 0, w = 0, c = 0;
    const auto back = io::load_float_container(dir / "t.ddf", h, w, c);
    CHECK(h == 3);
    CHECK(w == 4);
    CHECK(c == 2);
    CHECK(back == planes);

    std::ofstream(dir / "bad.ddf") << "not a container";
    int dummy;
    CHECK_THROWS_AS(io::load_float_container(dir / "bad.ddf", dummy, dummy, dummy),
                    input_error);
    fs::remove_all(dir);
}
