// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "depthdiff/core/types.hpp"
#include "depthdiff/nn/params.hpp"

namespace depthdiff::codec {

/// Scene depth range mapped onto [0, 1] for the sigmoid decoder.
struct DepthNormalization {
    double d_min = 0.2;
    double d_max = 2.0;

    double normalize(double meters) const { return (meters - d_min) / (d_max - d_min); }
    double denormalize(double unit) const { return d_min + unit * (d_max - d_min); }
};

struct CodecConfig {
    int c1 = 16;              // first encoder stage channels
    int c2 = 32;              // second encoder stage channels
    int latent_channels = 4;  // D
};

/// Eq.-style pixel loss over two depth maps:
///   sqrt( mean(d^2) + lambda * mean(d)^2 ),  d = pred - gt over all pixels.
/// No mask; callers pass normalized maps during training.
double pixel_loss(const DepthMap& pred, const DepthMap& gt, double lambda);

/// Depth encoder/decoder between image resolution and the 1/4-scale latent.
/// The encoder replicates the single depth channel to three channels; the
/// decoder ends in a sigmoid and the three decoded channels are averaged.
class DepthCodec {
  public:
    DepthCodec(const CodecConfig& cfg, uint64_t seed);

    const CodecConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    /// Graph-building core: (1,H,W) normalized depth -> (D,H/4,W/4) latent.
    nn::VarPtr encode_graph(const nn::VarPtr& norm_depth) const;

    /// Graph-building core: latent -> (3,H,W) channels in (0,1).
    nn::VarPtr decode_graph(const nn::VarPtr& latent) const;

    /// Encodes a fully valid depth map. Throws if any pixel is invalid, the
    /// dimensions are not divisible by 4, or normalization leaves the
    /// configured range by more than 5%.
    nn::Tensor encode(const DepthMap& depth, const DepthNormalization& norm) const;

    /// Decodes a latent to meters: sigmoid channels averaged, un-normalized.
    /// Every output pixel lies strictly inside (d_min, d_max).
    DepthMap decode(const nn::Tensor& latent, const DepthNormalization& norm) const;

  private:
    CodecConfig cfg_;
    nn::ParamStore params_;
};

}  // namespace depthdiff::codec
