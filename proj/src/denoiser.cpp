// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/denoiser.hpp"

#include <cmath>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::denoiser {

using nn::Tensor;
using nn::VarPtr;

Tensor timestep_embedding(int t, int dim) {
    if (dim < 2 || dim % 2 != 0)
        throw invalid_argument("timestep_embedding: dim must be even and >= 2");
    const int half = dim / 2;
    Tensor emb({dim});
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        emb.data[i] = std::sin(t * freq);
        emb.data[half + i] = std::cos(t * freq);
    }
    return emb;
}

Denoiser::Denoiser(const DenoiserConfig& cfg, uint64_t seed) : cfg_(cfg) {
    Rng rng(Rng::derive(seed, 0xD0153));
    auto conv_std = [](int fan_in) { return std::sqrt(2.0 / fan_in); };

    auto make_branch = [&](const std::string& name, int in_ch) {
        params_.create(name + ".c1.w", {cfg.pyr_c1, in_ch, 3, 3}, rng, conv_std(in_ch * 9));
        params_.create_zeros(name + ".c1.b", {cfg.pyr_c1});
        params_.create(name + ".c2.w", {cfg.pyr_c2, cfg.pyr_c1, 3, 3}, rng,
                       conv_std(cfg.pyr_c1 * 9));
        params_.create_zeros(name + ".c2.b", {cfg.pyr_c2});
        params_.create(name + ".c3.w", {cfg.pyr_c3, cfg.pyr_c2, 3, 3}, rng,
                       conv_std(cfg.pyr_c2 * 9));
        params_.create_zeros(name + ".c3.b", {cfg.pyr_c3});
    };
    make_branch("rgb", 3);
    if (cfg.use_depth_branch) make_branch("depth", 1);

    const int pyr_total = cfg.pyr_c1 + cfg.pyr_c2 + cfg.pyr_c3;
    const int fused_in = cfg.use_depth_branch ? 2 * pyr_total : pyr_total;
    params_.create("fuse.proj.w", {cfg.cond_channels, fused_in, 1, 1}, rng,
                   conv_std(fused_in));
    params_.create_zeros("fuse.proj.b", {cfg.cond_channels});
    const double attn_std = 1.0 / std::sqrt(static_cast<double>(cfg.cond_channels));
    params_.create("fuse.attn.wq", {cfg.cond_channels, cfg.cond_channels}, rng, attn_std);
    params_.create("fuse.attn.wk", {cfg.cond_channels, cfg.cond_channels}, rng, attn_std);
    params_.create("fuse.attn.wv", {cfg.cond_channels, cfg.cond_channels}, rng, attn_std);
    params_.create("fuse.attn.wo", {cfg.cond_channels, cfg.cond_channels}, rng,
                   0.1 * attn_std);

    const int c = cfg.trunk_channels;
    params_.create("trunk.in.w", {c, cfg.latent_channels + cfg.cond_channels, 1, 1}, rng,
                   conv_std(cfg.latent_channels + cfg.cond_channels));
    params_.create_zeros("trunk.in.b", {c});
    params_.create("trunk.temb.w", {c, cfg.temb_dim}, rng, conv_std(cfg.temb_dim));
    params_.create_zeros("trunk.temb.b", {c});

    const int se = std::max(1, c / 8);
    for (int i = 0; i < cfg.blocks; ++i) {
        const std::string p = "block" + std::to_string(i);
        params_.create(p + ".mod.gw", {c, cfg.temb_dim}, rng, 0.01);
        params_.create_zeros(p + ".mod.gb", {c});
        params_.create(p + ".mod.bw", {c, cfg.temb_dim}, rng, 0.01);
        params_.create_zeros(p + ".mod.bb", {c});
        params_.create(p + ".c1.w", {cfg.bottleneck_channels, c, 1, 1}, rng, conv_std(c));
        params_.create_zeros(p + ".c1.b", {cfg.bottleneck_channels});
        params_.create(p + ".c2.w",
                       {cfg.bottleneck_channels, cfg.bottleneck_channels, 3, 3}, rng,
                       conv_std(cfg.bottleneck_channels * 9));
        params_.create_zeros(p + ".c2.b", {cfg.bottleneck_channels});
        params_.create(p + ".c3.w", {c, cfg.bottleneck_channels, 1, 1}, rng,
                       conv_std(cfg.bottleneck_channels));
        params_.create_zeros(p + ".c3.b", {c});
        params_.create(p + ".se.w1", {se, c}, rng, conv_std(c));
        params_.create_zeros(p + ".se.b1", {se});
        params_.create(p + ".se.w2", {c, se}, rng, conv_std(se));
        params_.create_zeros(p + ".se.b2", {c});
        // Small nonzero residual scale keeps every branch live from step one.
        params_.create_full(p + ".res_scale", {1}, 0.1);
    }
    params_.create("head.w", {cfg.latent_channels, c, 1, 1}, rng, conv_std(c));
    params_.create_zeros("head.b", {cfg.latent_channels});
}

Denoiser::Pyramid Denoiser::extract_multiscale(const VarPtr& image,
                                               const std::string& branch) const {
    if (image->value.ndim() != 3)
        throw invalid_argument("extract_multiscale: expected (K,H,W) image");
    const int h = image->value.dim(1), w = image->value.dim(2);
    if (h % 4 != 0 || w % 4 != 0) {
        const int ph = (4 - h % 4) % 4, pw = (4 - w % 4) % 4;
        throw invalid_argument("extract_multiscale: dimensions " + std::to_string(h) + "x" +
                               std::to_string(w) + " not divisible by 4; pad by " +
                               std::to_string(ph) + " rows and " + std::to_string(pw) +
                               " columns");
    }
    Pyramid pyr;
    pyr.f1 = silu(conv2d(image, params_.get(branch + ".c1.w"), params_.get(branch + ".c1.b"),
                         1, 1));
    pyr.f2 = silu(conv2d(pyr.f1, params_.get(branch + ".c2.w"), params_.get(branch + ".c2.b"),
                         2, 1));
    pyr.f4 = silu(conv2d(pyr.f2, params_.get(branch + ".c3.w"), params_.get(branch + ".c3.b"),
                         2, 1));
    return pyr;
}

VarPtr Denoiser::fuse_features(const Pyramid& rgb, const Pyramid* depth,
                               Tensor* attention_out) const {
    if (static_cast<bool>(depth) != cfg_.use_depth_branch)
        throw invalid_argument("fuse_features: depth pyramid presence must match config");
    auto level = [&](const VarPtr& r, const VarPtr& d, int pool) {
        VarPtr x = depth ? concat_ch(r, d) : r;
        return pool > 1 ? avg_pool2d(x, pool) : x;
    };
    VarPtr g1 = level(rgb.f1, depth ? depth->f1 : nullptr, 4);
    VarPtr g2 = level(rgb.f2, depth ? depth->f2 : nullptr, 2);
    VarPtr g4 = level(rgb.f4, depth ? depth->f4 : nullptr, 1);
    if (g1->value.dim(1) != g4->value.dim(1) || g2->value.dim(1) != g4->value.dim(1))
        throw invalid_argument("fuse_features: pyramid scales disagree");
    VarPtr cat = concat_ch(g1, concat_ch(g2, g4));
    VarPtr c0 = conv2d(cat, params_.get("fuse.proj.w"), params_.get("fuse.proj.b"), 1, 0);

    // Single-head self-attention over the flattened 1/4-scale grid.
    const int h = c0->value.dim(1), w = c0->value.dim(2);
    VarPtr tokens = chw_to_tokens(c0);
    VarPtr q = matmul(tokens, params_.get("fuse.attn.wq"));
    VarPtr k = matmul(tokens, params_.get("fuse.attn.wk"));
    VarPtr v = matmul(tokens, params_.get("fuse.attn.wv"));
    VarPtr scores =
        scale_const(matmul(q, transpose2(k)), 1.0 / std::sqrt(double(cfg_.cond_channels)));
    VarPtr attn = softmax_rows(scores);
    if (attention_out) *attention_out = attn->value;
    VarPtr out = add(tokens, matmul(matmul(attn, v), params_.get("fuse.attn.wo")));
    return tokens_to_chw(out, h, w);
}

VarPtr Denoiser::condition(const Tensor& rgb, const Tensor* refined_depth,
                           Tensor* attention_out) const {
    if (rgb.ndim() != 3 || rgb.dim(0) != 3)
        throw invalid_argument("condition: rgb must be (3,H,W)");
    Pyramid rgb_pyr = extract_multiscale(nn::constant(rgb), "rgb");
    if (!cfg_.use_depth_branch) {
        if (refined_depth)
            throw invalid_argument("condition: rgb-only config takes no depth input");
        return fuse_features(rgb_pyr, nullptr, attention_out);
    }
    if (!refined_depth) throw invalid_argument("condition: refined depth required");
    if (refined_depth->ndim() != 3 || refined_depth->dim(0) != 1)
        throw invalid_argument("condition: refined depth must be (1,H,W)");
    Pyramid d_pyr = extract_multiscale(nn::constant(*refined_depth), "depth");
    return fuse_features(rgb_pyr, &d_pyr, attention_out);
}

VarPtr Denoiser::bottleneck_block(int i, const VarPtr& h, const Tensor& temb) const {
    const std::string p = "block" + std::to_string(i);
    VarPtr te = nn::constant(temb);
    VarPtr gamma = linear(te, params_.get(p + ".mod.gw"), params_.get(p + ".mod.gb"));
    VarPtr beta = linear(te, params_.get(p + ".mod.bw"), params_.get(p + ".mod.bb"));
    VarPtr ones = nn::constant(Tensor::full({cfg_.trunk_channels}, 1.0));
    VarPtr u = add_channel(mul_channel(h, add(ones, gamma)), beta);

    VarPtr v = silu(conv2d(u, params_.get(p + ".c1.w"), params_.get(p + ".c1.b"), 1, 0));
    v = silu(conv2d(v, params_.get(p + ".c2.w"), params_.get(p + ".c2.b"), 1, 1));
    v = conv2d(v, params_.get(p + ".c3.w"), params_.get(p + ".c3.b"), 1, 0);

    // Squeeze-excite channel attention.
    VarPtr s = global_avg_pool(v);
    VarPtr gate = sigmoid(linear(silu(linear(s, params_.get(p + ".se.w1"),
                                             params_.get(p + ".se.b1"))),
                                 params_.get(p + ".se.w2"), params_.get(p + ".se.b2")));
    v = mul_channel(v, gate);

    return add(h, scale_var(v, params_.get(p + ".res_scale")));
}

VarPtr Denoiser::predict(const VarPtr& x_t, int t, const VarPtr& c) const {
    if (x_t->value.ndim() != 3 || x_t->value.dim(0) != cfg_.latent_channels)
        throw invalid_argument("predict: x_t must be (D,h,w), got " + x_t->value.shape_str());
    if (c->value.ndim() != 3 || c->value.dim(0) != cfg_.cond_channels)
        throw invalid_argument("predict: condition must be (C,h,w)");
    if (x_t->value.dim(1) != c->value.dim(1) || x_t->value.dim(2) != c->value.dim(2))
        throw invalid_argument("predict: x_t and condition are not spatially aligned");
    if (t < 0 || t >= cfg_.max_timestep)
        throw invalid_argument("predict: timestep " + std::to_string(t) +
                               " out of range [0," + std::to_string(cfg_.max_timestep - 1) +
                               "]");

    const Tensor temb = timestep_embedding(t, cfg_.temb_dim);
    VarPtr te_proj = linear(nn::constant(temb), params_.get("trunk.temb.w"),
                            params_.get("trunk.temb.b"));
    VarPtr h = conv2d(concat_ch(x_t, c), params_.get("trunk.in.w"),
                      params_.get("trunk.in.b"), 1, 0);
    h = add_channel(h, te_proj);
    for (int i = 0; i < cfg_.blocks; ++i) h = bottleneck_block(i, h, temb);
    return conv2d(h, params_.get("head.w"), params_.get("head.b"), 1, 0);
}

Tensor Denoiser::channel_gates(int block, const VarPtr& trunk_act) const {
    const std::string p = "block" + std::to_string(block);
    VarPtr s = global_avg_pool(trunk_act);
    VarPtr gate = sigmoid(linear(silu(linear(s, params_.get(p + ".se.w1"),
                                             params_.get(p + ".se.b1"))),
                                 params_.get(p + ".se.w2"), params_.get(p + ".se.b2")));
    return gate->value;
}

}  // namespace depthdiff::denoiser
