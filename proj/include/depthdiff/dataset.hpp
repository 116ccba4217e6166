// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "depthdiff/core/config.hpp"
#include "depthdiff/core/rng.hpp"
#include "depthdiff/core/types.hpp"

namespace depthdiff::data {

/// Parameters of the synthetic transparent-scene generator.
struct SynthSpec {
    int width = 64;
    int height = 48;
    int objects_min = 1;
    int objects_max = 5;
    double table_depth_min = 0.7;   // meters
    double table_depth_max = 1.4;
    double hole_prob = 0.85;        // dropout probability inside the mask
    double noise_sigma = 0.012;     // additive sensor noise, meters
    double leak_sigma = 0.02;       // refraction-like depth offset, meters
    double focal = 70.0;            // pixels
    double boundary_threshold = 0.04;

    static SynthSpec from_config(const Config& cfg);
    void validate() const;
};

/// Canonical hash of a SynthSpec, stored in each sample's meta file.
uint64_t spec_hash(const SynthSpec& spec);

/// Renders one tabletop scene: a tilted table plane plus simple solids, a
/// subset transparent. Inside transparent masks the raw depth is corrupted
/// by dropouts, leaked background depth, and additive noise; outside the
/// mask it equals the ground truth exactly. RGB shows transparent objects
/// only as faint rims over the background. Normals and boundaries are
/// derived from the ground-truth depth.
SceneSample generate_scene(const SynthSpec& spec, Rng& rng, const std::string& id);

enum class DatasetKind { synthetic, cleargrasp, transcg };
DatasetKind parse_dataset_kind(const std::string& name);

/// Writes one sample in the synthetic layout:
///   <dir>/{rgb.png, depth_raw.png, depth_gt.png, mask.png, meta.txt}
void save_sample(const std::filesystem::path& dir, const SceneSample& sample,
                 uint64_t spec_hash_value);

/// Loads a sample. File layout depends on kind:
///   synthetic:  <root>/<id>/{rgb.png,depth_raw.png,depth_gt.png,mask.png,meta.txt}
///               (ids are usually "<split>/<number>")
///   cleargrasp: <root>/<id>-rgb.png, <id>-transparent-depth.png,
///               <id>-opaque-depth.png, <id>-mask.png, optional <id>-meta.txt
///   transcg:    <root>/<id>/{rgb1.png,depth1.png,depth1_gt.png,depth1_gt_mask.png},
///               optional meta.txt
/// Depths are 16-bit millimeter PNGs with 0 = invalid. If target_w/target_h
/// are nonzero the sample is resampled (area average for rgb and depth,
/// nearest for the mask) and intrinsics are rescaled. Missing normals and
/// boundaries are synthesized from the ground-truth depth.
SceneSample load_sample(const std::filesystem::path& root, DatasetKind kind,
                        const std::string& id, int target_w = 0, int target_h = 0,
                        double boundary_threshold = 0.04);

struct SplitIds {
    std::vector<std::string> train, val, test;
};

/// Deterministic shuffled partition; disjoint and exhaustive. Fractions
/// must be non-negative and sum to 1.
SplitIds split(const std::vector<std::string>& corpus, double f_train, double f_val,
               double f_test, uint64_t seed);

/// Generates the full corpus under root/{train,val,test}/<id>/ and stores
/// the resolved generator spec next to it. (spec, seed) determines every
/// byte of the corpus.
void generate_corpus(const std::filesystem::path& root, const SynthSpec& spec, int n_train,
                     int n_val, int n_test, uint64_t seed);

/// Ids present under <root>/<split> in lexicographic order.
std::vector<std::string> list_corpus_ids(const std::filesystem::path& root,
                                         const std::string& split);

// Resampling helpers shared with the loaders (exposed for tests).
std::vector<double> resample_area(const std::vector<double>& src, int sh, int sw, int th,
                                  int tw);
DepthMap resample_depth_area(const DepthMap& src, int th, int tw);
TransparencyMask resample_mask_nearest(const TransparencyMask& src, int th, int tw);

}  // namespace depthdiff::data
