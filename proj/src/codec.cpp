// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/codec.hpp"

#include <cmath>
#include <string>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::codec {

using nn::VarPtr;

double pixel_loss(const DepthMap& pred, const DepthMap& gt, double lambda) {
    if (pred.h != gt.h || pred.w != gt.w)
        throw invalid_argument("pixel_loss: shape mismatch");
    const size_t n = pred.size();
    if (n == 0) throw invalid_argument("pixel_loss: empty input");
    if (lambda < 0.0) throw invalid_argument("pixel_loss: lambda must be >= 0");
    double s1 = 0.0, s2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = pred.values[i] - gt.values[i];
        s1 += d;
        s2 += d * d;
    }
    const double t = static_cast<double>(n);
    return std::sqrt(s2 / t + lambda * s1 * s1 / (t * t));
}

DepthCodec::DepthCodec(const CodecConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(Rng::derive(seed, 0xC0DEC));
    auto conv_std = [](int fan_in) { return std::sqrt(2.0 / fan_in); };

    // Encoder: strided conv stack, factor-4 downsample, to D channels.
    params_.create("enc.c1.w", {cfg.c1, 3, 3, 3}, rng, conv_std(3 * 9));
    params_.create_zeros("enc.c1.b", {cfg.c1});
    params_.create("enc.c2.w", {cfg.c2, cfg.c1, 3, 3}, rng, conv_std(cfg.c1 * 9));
    params_.create_zeros("enc.c2.b", {cfg.c2});
    params_.create("enc.out.w", {cfg.latent_channels, cfg.c2, 1, 1}, rng, conv_std(cfg.c2));
    params_.create_zeros("enc.out.b", {cfg.latent_channels});

    // Decoder: 1x1 conv, 3x3 de-convolutions, sigmoid head to 3 channels.
    params_.create("dec.in.w", {cfg.c2, cfg.latent_channels, 1, 1}, rng,
                   conv_std(cfg.latent_channels));
    params_.create_zeros("dec.in.b", {cfg.c2});
    params_.create("dec.up1.w", {cfg.c2, cfg.c1, 3, 3}, rng, conv_std(cfg.c2 * 9));
    params_.create_zeros("dec.up1.b", {cfg.c1});
    params_.create("dec.mid.w", {cfg.c1, cfg.c1, 1, 1}, rng, conv_std(cfg.c1));
    params_.create_zeros("dec.mid.b", {cfg.c1});
    params_.create("dec.up2.w", {cfg.c1, 3, 3, 3}, rng, conv_std(cfg.c1 * 9));
    params_.create_zeros("dec.up2.b", {3});
}

VarPtr DepthCodec::encode_graph(const VarPtr& norm_depth) const {
    if (norm_depth->value.ndim() != 3 || norm_depth->value.dim(0) != 1)
        throw invalid_argument("encode_graph: expected (1,H,W) input");
    // Replicate the single channel into three to mimic an RGB input.
    VarPtr x = concat_ch(norm_depth, concat_ch(norm_depth, norm_depth));
    x = silu(conv2d(x, params_.get("enc.c1.w"), params_.get("enc.c1.b"), 2, 1));
    x = silu(conv2d(x, params_.get("enc.c2.w"), params_.get("enc.c2.b"), 2, 1));
    return conv2d(x, params_.get("enc.out.w"), params_.get("enc.out.b"), 1, 0);
}

VarPtr DepthCodec::decode_graph(const VarPtr& latent) const {
    if (latent->value.ndim() != 3 || latent->value.dim(0) != cfg_.latent_channels)
        throw invalid_argument("decode_graph: latent channel mismatch, got " +
                               latent->value.shape_str());
    VarPtr x = silu(conv2d(latent, params_.get("dec.in.w"), params_.get("dec.in.b"), 1, 0));
    x = silu(conv_transpose2d(x, params_.get("dec.up1.w"), params_.get("dec.up1.b"), 2, 1, 1));
    x = silu(conv2d(x, params_.get("dec.mid.w"), params_.get("dec.mid.b"), 1, 0));
    x = conv_transpose2d(x, params_.get("dec.up2.w"), params_.get("dec.up2.b"), 2, 1, 1);
    return sigmoid(x);
}

nn::Tensor DepthCodec::encode(const DepthMap& depth, const DepthNormalization& norm) const {
    if (!(norm.d_min < norm.d_max))
        throw invalid_argument("encode: d_min must be < d_max");
    if (depth.h % 4 != 0 || depth.w % 4 != 0)
        throw invalid_argument("encode: dimensions must be divisible by 4, got " +
                               std::to_string(depth.h) + "x" + std::to_string(depth.w));
    nn::Tensor in({1, depth.h, depth.w});
    for (size_t i = 0; i < depth.size(); ++i) {
        if (!depth.valid[i])
            throw invalid_argument("encode: depth has invalid pixels; encode runs on complete maps");
        const double u = norm.normalize(depth.values[i]);
        if (u < -0.05 || u > 1.05)
            throw invalid_argument("encode: depth " + std::to_string(depth.values[i]) +
                                   " m leaves the configured normalization range [" +
                                   std::to_string(norm.d_min) + ", " +
                                   std::to_string(norm.d_max) + "]");
        in.data[i] = u;
    }
    return encode_graph(nn::constant(std::move(in)))->value;
}

DepthMap DepthCodec::decode(const nn::Tensor& latent, const DepthNormalization& norm) const {
    if (latent.ndim() != 3 || latent.dim(0) != cfg_.latent_channels)
        throw invalid_argument("decode: latent shape mismatch, got " + latent.shape_str());
    const VarPtr out = decode_graph(nn::constant(latent));
    const int h = out->value.dim(1), w = out->value.dim(2);
    DepthMap depth(h, w);
    // Average of the three decoded channels, then back to meters.
    for (int i = 0; i < h * w; ++i) {
        const double m = (out->value.data[i] + out->value.data[static_cast<size_t>(h) * w + i] +
                          out->value.data[2 * static_cast<size_t>(h) * w + i]) / 3.0;
        depth.values[i] = norm.denormalize(m);
    }
    return depth;
}

}  // namespace depthdiff::codec
