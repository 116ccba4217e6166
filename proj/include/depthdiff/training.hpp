// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "depthdiff/codec.hpp"
#include "depthdiff/core/config.hpp"
#include "depthdiff/core/rng.hpp"
#include "depthdiff/core/types.hpp"
#include "depthdiff/denoiser.hpp"
#include "depthdiff/scheduler.hpp"

namespace depthdiff::train {

/// Latent prediction loss: mean squared error over all entries.
double diffusion_loss(const nn::Tensor& pred_x0, const nn::Tensor& true_x0);

/// L2 term between ground-truth and predicted latent (same mean-square form,
/// kept as a separately weighted term of the composite loss).
double latent_l2_loss(const nn::Tensor& pred_x0, const nn::Tensor& true_x0);

/// lambda1 * diffusion_loss + lambda2 * pixel_loss + lambda3 * latent L2.
double total_loss(const nn::Tensor& pred_x0, const nn::Tensor& true_x0,
                  const DepthMap& decoded_pred, const DepthMap& gt_depth, const Config& cfg);

/// Uniform over [0, T-1], or over the plan entries when train_on_plan.
int sample_training_timestep(const Config& cfg, const diffusion::TimestepPlan& plan, Rng& rng);

/// One preloaded training example: normalized tensors plus the cached
/// ground-truth latent (filled in by train_diffusion).
struct TrainItem {
    std::string id;
    nn::Tensor rgb;           // (3,H,W) in [0,1]
    nn::Tensor gt_norm;       // (1,H,W) normalized depth
    nn::Tensor refined_norm;  // (1,H,W) normalized refined depth; empty in rgb-only mode
    nn::Tensor x0;            // (D,h,w) cached latent
};

/// Normalized-and-clamped depth tensor for conditioning inputs.
nn::Tensor normalize_for_condition(const DepthMap& depth, const codec::DepthNormalization& n);

/// Loads a split into memory. refined_dir may be empty when the refined
/// branch is unused; otherwise it must hold <split>/<id>.png refined maps.
std::vector<TrainItem> load_train_items(const std::filesystem::path& corpus_root,
                                        const std::string& split, const Config& cfg,
                                        const std::filesystem::path& refined_dir);

/// Geometry preprocessing of one sample: mask out untrusted depth, then the
/// global-optimization solve guided by the sample's normals and boundaries.
DepthMap refine_depth(const SceneSample& sample, const Config& cfg);

/// Trains the codec on ground-truth depths; writes checkpoint + jsonl log
/// into run_dir and returns the checkpoint path. Deterministic given seed.
std::filesystem::path train_codec_stage(const std::vector<TrainItem>& items, const Config& cfg,
                                        const std::filesystem::path& run_dir);

/// Trains the conditioned denoiser against a frozen codec (its parameters
/// are switched to non-trainable for the stage). Items gain their cached x0
/// latents. A non-empty init_checkpoint warm-starts the denoiser from an
/// existing compatible checkpoint (plan retraining continues from the base
/// model). Returns the checkpoint path.
std::filesystem::path train_diffusion_stage(std::vector<TrainItem>& items,
                                            codec::DepthCodec& frozen_codec, const Config& cfg,
                                            const std::filesystem::path& run_dir,
                                            const std::filesystem::path& init_checkpoint = {});

struct LoadedCodec {
    codec::DepthCodec codec;
    Config cfg;
};
struct LoadedDenoiser {
    denoiser::Denoiser den;
    Config cfg;
};

LoadedCodec load_codec_checkpoint(const std::filesystem::path& path);
LoadedDenoiser load_denoiser_checkpoint(const std::filesystem::path& path);

denoiser::DenoiserConfig denoiser_config_from(const Config& cfg);
codec::CodecConfig codec_config_from(const Config& cfg);
codec::DepthNormalization normalization_from(const Config& cfg);

/// Full inference for one sample: geometry preprocessing, condition
/// construction, DDIM reverse pass from seeded noise, decode. The noise
/// stream derives from (seed, sample id), so results are order-independent.
/// steps_override > 0 replaces cfg.infer_steps.
DepthMap infer_sample(const SceneSample& sample, const codec::DepthCodec& codec,
                      const denoiser::Denoiser& den, const Config& cfg, uint64_t seed,
                      int steps_override = 0);

}  // namespace depthdiff::train
