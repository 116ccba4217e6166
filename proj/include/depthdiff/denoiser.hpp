// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "depthdiff/nn/params.hpp"

namespace depthdiff::denoiser {

struct DenoiserConfig {
    int trunk_channels = 64;       // C of the bottleneck trunk
    int bottleneck_channels = 16;  // inner channels of each bottleneck block
    int blocks = 4;                // N residual blocks
    int latent_channels = 4;       // D
    int cond_channels = 32;        // channels of the fused visual condition
    int pyr_c1 = 8;                // feature pyramid channels at 1/1
    int pyr_c2 = 16;               // at 1/2
    int pyr_c3 = 24;               // at 1/4
    int temb_dim = 32;             // sinusoidal timestep embedding width
    int max_timestep = 1000;       // training horizon T
    bool use_depth_branch = true;  // false = rgb-only conditioning ablation
};

/// Sinusoidal embedding of an integer timestep; dim must be even.
nn::Tensor timestep_embedding(int t, int dim);

/// Conditioned x0-prediction network: multi-scale feature extraction from
/// RGB and refined depth, fusion with one self-attention layer into the
/// visual condition, and a bottleneck trunk with channel attention that maps
/// (x_t, t, c) to an estimate of the clean latent.
class Denoiser {
  public:
    struct Pyramid {
        nn::VarPtr f1, f2, f4;  // 1/1, 1/2, 1/4 scale features
    };

    Denoiser(const DenoiserConfig& cfg, uint64_t seed);

    const DenoiserConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    /// Three feature maps from a strided conv stack. The image tensor is
    /// (K,H,W) with H, W divisible by 4; `branch` selects the weight set
    /// ("rgb" or "depth").
    Pyramid extract_multiscale(const nn::VarPtr& image, const std::string& branch) const;

    /// Concatenates per-scale features, resamples everything to 1/4 scale,
    /// applies the 1x1 local projection and one self-attention layer.
    /// `depth` may be null in rgb-only mode. If attention_out is non-null it
    /// receives the (P,P) attention row distribution.
    nn::VarPtr fuse_features(const Pyramid& rgb, const Pyramid* depth,
                             nn::Tensor* attention_out = nullptr) const;

    /// Convenience: condition c from a normalized RGB tensor (3,H,W) and an
    /// optional normalized refined-depth tensor (1,H,W).
    nn::VarPtr condition(const nn::Tensor& rgb, const nn::Tensor* refined_depth,
                         nn::Tensor* attention_out = nullptr) const;

    /// x0 estimate from the noisy latent, the timestep, and the condition.
    nn::VarPtr predict(const nn::VarPtr& x_t, int t, const nn::VarPtr& c) const;

    /// Channel-attention gates of block `i` for a given trunk activation;
    /// exposed so tests can check the (0,1) range on real activations.
    nn::Tensor channel_gates(int block, const nn::VarPtr& trunk_act) const;

  private:
    nn::VarPtr bottleneck_block(int i, const nn::VarPtr& h, const nn::Tensor& temb) const;

    DenoiserConfig cfg_;
    nn::ParamStore params_;
};

}  // namespace depthdiff::denoiser
