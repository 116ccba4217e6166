// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/dataset.hpp"
#include "depthdiff/geometry.hpp"
#include "depthdiff/io/image_io.hpp"

namespace depthdiff::train {

using nn::Tensor;
using nn::VarPtr;

double diffusion_loss(const Tensor& pred_x0, const Tensor& true_x0) {
    if (pred_x0.shape != true_x0.shape)
        throw invalid_argument("diffusion_loss: shape mismatch " + pred_x0.shape_str() +
                               " vs " + true_x0.shape_str());
    if (pred_x0.numel() == 0) throw invalid_argument("diffusion_loss: empty latent");
    double acc = 0.0;
    for (size_t i = 0; i < pred_x0.data.size(); ++i) {
        const double d = pred_x0.data[i] - true_x0.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred_x0.numel());
}

double latent_l2_loss(const Tensor& pred_x0, const Tensor& true_x0) {
    return diffusion_loss(pred_x0, true_x0);
}

double total_loss(const Tensor& pred_x0, const Tensor& true_x0, const DepthMap& decoded_pred,
                  const DepthMap& gt_depth, const Config& cfg) {
    if (cfg.train_lambda1 < 0 || cfg.train_lambda2 < 0 || cfg.train_lambda3 < 0)
        throw invalid_argument("total_loss: negative loss weights");
    return cfg.train_lambda1 * diffusion_loss(pred_x0, true_x0) +
           cfg.train_lambda2 * codec::pixel_loss(decoded_pred, gt_depth, cfg.codec_lambda) +
           cfg.train_lambda3 * latent_l2_loss(pred_x0, true_x0);
}

int sample_training_timestep(const Config& cfg, const diffusion::TimestepPlan& plan,
                             Rng& rng) {
    if (cfg.train_on_plan) {
        if (plan.steps.empty())
            throw invalid_argument("sample_training_timestep: empty plan in on-plan mode");
        return plan.steps[static_cast<size_t>(rng.uniform_int(0, plan.count() - 1))];
    }
    return static_cast<int>(rng.uniform_int(0, cfg.schedule_T - 1));
}

codec::DepthNormalization normalization_from(const Config& cfg) {
    codec::DepthNormalization n;
    n.d_min = cfg.norm_d_min;
    n.d_max = cfg.norm_d_max;
    if (!(n.d_min < n.d_max)) throw invalid_argument("config: norm.d_min must be < norm.d_max");
    return n;
}

codec::CodecConfig codec_config_from(const Config& cfg) {
    codec::CodecConfig c;
    c.c1 = cfg.codec_c1;
    c.c2 = cfg.codec_c2;
    c.latent_channels = cfg.denoiser_latent_channels;
    return c;
}

denoiser::DenoiserConfig denoiser_config_from(const Config& cfg) {
    denoiser::DenoiserConfig d;
    d.trunk_channels = cfg.denoiser_trunk_channels;
    d.bottleneck_channels = cfg.denoiser_bottleneck_channels;
    d.blocks = cfg.denoiser_blocks;
    d.latent_channels = cfg.denoiser_latent_channels;
    d.cond_channels = cfg.denoiser_cond_channels;
    d.pyr_c1 = cfg.denoiser_pyr_c1;
    d.pyr_c2 = cfg.denoiser_pyr_c2;
    d.pyr_c3 = cfg.denoiser_pyr_c3;
    d.temb_dim = cfg.denoiser_temb_dim;
    d.max_timestep = cfg.schedule_T;
    if (cfg.denoiser_condition_mode == "refined")
        d.use_depth_branch = true;
    else if (cfg.denoiser_condition_mode == "rgb_only")
        d.use_depth_branch = false;
    else
        throw config_error("denoiser.condition_mode must be refined|rgb_only, got '" +
                           cfg.denoiser_condition_mode + "'");
    return d;
}

Tensor normalize_for_condition(const DepthMap& depth, const codec::DepthNormalization& n) {
    Tensor t({1, depth.h, depth.w});
    for (size_t i = 0; i < depth.size(); ++i) {
        const double u = n.normalize(depth.values[i]);
        t.data[i] = std::min(1.0, std::max(0.0, u));
    }
    return t;
}

DepthMap refine_depth(const SceneSample& sample, const Config& cfg) {
    const DepthMap masked = geo::mask_invalid_depth(sample.raw_depth, sample.mask);
    geo::OptimizeWeights wt{cfg.geo_w_obs, cfg.geo_w_normal, cfg.geo_w_smooth};
    geo::OptimizeOptions opt{cfg.geo_cg_tol, cfg.geo_cg_max_iter_factor};
    return geo::global_optimize_depth(masked, sample.normals, sample.boundaries, wt,
                                      sample.intrinsics, opt);
}

std::vector<TrainItem> load_train_items(const std::filesystem::path& corpus_root,
                                        const std::string& split, const Config& cfg,
                                        const std::filesystem::path& refined_dir) {
    const auto ids = data::list_corpus_ids(corpus_root, split);
    if (ids.empty()) throw input_error("no samples under " + (corpus_root / split).string());
    const auto norm = normalization_from(cfg);

    std::vector<TrainItem> items;
    items.reserve(ids.size());
    for (const auto& id : ids) {
        const SceneSample s = data::load_sample(corpus_root, data::DatasetKind::synthetic,
                                                split + "/" + id, 0, 0,
                                                cfg.geo_boundary_threshold);
        TrainItem item;
        item.id = id;
        item.rgb = Tensor({3, s.rgb.h, s.rgb.w});
        item.rgb.data = s.rgb.data;
        bool gt_ok = true;
        for (uint8_t v : s.gt_depth.valid) gt_ok &= (v != 0);
        if (!gt_ok) throw input_error("sample " + id + ": ground truth has invalid pixels");
        item.gt_norm = Tensor({1, s.gt_depth.h, s.gt_depth.w});
        for (size_t i = 0; i < s.gt_depth.size(); ++i)
            item.gt_norm.data[i] = norm.normalize(s.gt_depth.values[i]);
        if (!refined_dir.empty()) {
            const auto refined_path = refined_dir / split / (id + ".png");
            if (!std::filesystem::exists(refined_path))
                throw input_error("missing refined depth: " + refined_path.string());
            item.refined_norm =
                normalize_for_condition(io::load_depth_png(refined_path), norm);
        }
        items.push_back(std::move(item));
    }
    return items;
}

namespace {

struct BatchLogger {
    std::ofstream out;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit BatchLogger(const std::filesystem::path& path) : out(path) {
        if (!out) throw input_error("cannot write training log: " + path.string());
    }

    void log(int64_t step, int epoch, double loss, double l_ddim, double l_pixel,
             double l_latent, double lr) {
        const auto wall =
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start).count();
        nlohmann::json j{{"step", step},       {"epoch", epoch},   {"loss", loss},
                         {"l_ddim", l_ddim},   {"l_pixel", l_pixel}, {"l_latent", l_latent},
                         {"lr", lr},           {"wall_ms", wall}};
        out << j.dump() << "\n";
    }
};

void shuffle_indices(std::vector<size_t>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
        std::swap(idx[i - 1], idx[j]);
    }
}

double cosine_lr(double lr0, int64_t step, int64_t total) {
    if (total <= 1) return lr0;
    const double frac = static_cast<double>(step) / static_cast<double>(total - 1);
    return lr0 * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

}  // namespace

std::filesystem::path train_codec_stage(const std::vector<TrainItem>& items, const Config& cfg,
                                        const std::filesystem::path& run_dir) {
    if (items.empty()) throw invalid_argument("train_codec_stage: empty dataset");
    std::filesystem::create_directories(run_dir);

    codec::DepthCodec cdc(codec_config_from(cfg), cfg.train_seed);
    nn::AdamOptimizer adam;
    BatchLogger logger(run_dir / "codec_train_log.jsonl");

    Rng shuffle_rng(Rng::derive(cfg.train_seed, 0x5F0FF1));
    std::vector<size_t> idx(items.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    const int batch = std::max(1, cfg.train_batch);
    const int64_t batches_per_epoch = (static_cast<int64_t>(items.size()) + batch - 1) / batch;
    const int64_t total_steps = batches_per_epoch * cfg.train_codec_epochs;
    int64_t step = 0;

    for (int epoch = 0; epoch < cfg.train_codec_epochs; ++epoch) {
        shuffle_indices(idx, shuffle_rng);
        for (size_t b0 = 0; b0 < idx.size(); b0 += batch) {
            const size_t b1 = std::min(idx.size(), b0 + batch);
            const double inv = 1.0 / static_cast<double>(b1 - b0);
            cdc.params().zero_grad();
            double batch_loss = 0.0;
            for (size_t bi = b0; bi < b1; ++bi) {
                const TrainItem& item = items[idx[bi]];
                VarPtr d = nn::constant(item.gt_norm);
                VarPtr z = cdc.encode_graph(d);
                VarPtr yhat = mean_channels(cdc.decode_graph(z));
                VarPtr reg = scale_const(mse(z, nn::constant(Tensor(z->value.shape))),
                                         cfg.codec_latent_reg);
                VarPtr loss = add(nn::pixel_loss_op(yhat, d, cfg.codec_lambda), reg);
                if (!std::isfinite(loss->value.data[0]))
                    throw numeric_error("train_codec: non-finite loss at step " +
                                        std::to_string(step) + " (sample " + item.id + ")");
                nn::backward(loss, inv);
                batch_loss += loss->value.data[0] * inv;
            }
            const double lr = cosine_lr(cfg.train_lr, step, total_steps);
            adam.step(cdc.params(), lr);
            logger.log(step, epoch, batch_loss, 0.0, batch_loss, 0.0, lr);
            ++step;
        }
    }

    const auto ckpt = run_dir / "codec.ckpt";
    nn::save_checkpoint(ckpt, "codec", cfg.to_text(), cdc.params());
    return ckpt;
}

std::filesystem::path train_diffusion_stage(std::vector<TrainItem>& items,
                                            codec::DepthCodec& frozen_codec, const Config& cfg,
                                            const std::filesystem::path& run_dir,
                                            const std::filesystem::path& init_checkpoint) {
    if (items.empty()) throw invalid_argument("train_diffusion_stage: empty dataset");
    std::filesystem::create_directories(run_dir);

    const auto den_cfg = denoiser_config_from(cfg);
    if (den_cfg.use_depth_branch)
        for (const auto& item : items)
            if (item.refined_norm.numel() == 0)
                throw input_error("train_diffusion: refined depth missing for sample " +
                                  item.id + " (run preprocess first)");

    // The codec stays frozen for the whole stage.
    frozen_codec.params().set_trainable(false);
    const uint64_t codec_checksum_before = frozen_codec.params().checksum();

    denoiser::Denoiser den(den_cfg, cfg.train_seed);
    if (!init_checkpoint.empty()) nn::load_checkpoint(init_checkpoint, "denoiser", den.params());
    nn::AdamOptimizer adam;
    BatchLogger logger(run_dir / "diffusion_train_log.jsonl");

    const auto schedule =
        diffusion::make_schedule(cfg.schedule_T, cfg.schedule_beta_start, cfg.schedule_beta_end);
    const auto plan = diffusion::make_timestep_plan(cfg.schedule_T, cfg.infer_steps);

    // Cache ground-truth latents once; the encoder is frozen.
    for (auto& item : items)
        if (item.x0.numel() == 0)
            item.x0 = frozen_codec.encode_graph(nn::constant(item.gt_norm))->value;

    Rng shuffle_rng(Rng::derive(cfg.train_seed, 0x5F0FF2));
    Rng t_rng(Rng::derive(cfg.train_seed, 0x7157EB));
    Rng noise_rng(Rng::derive(cfg.train_seed, 0x901532));

    std::vector<size_t> idx(items.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    const int batch = std::max(1, cfg.train_batch);
    const int64_t batches_per_epoch = (static_cast<int64_t>(items.size()) + batch - 1) / batch;
    const int64_t total_steps = batches_per_epoch * cfg.train_diffusion_epochs;
    int64_t step = 0;

    for (int epoch = 0; epoch < cfg.train_diffusion_epochs; ++epoch) {
        shuffle_indices(idx, shuffle_rng);
        for (size_t b0 = 0; b0 < idx.size(); b0 += batch) {
            const size_t b1 = std::min(idx.size(), b0 + batch);
            const double inv = 1.0 / static_cast<double>(b1 - b0);
            den.params().zero_grad();
            double batch_loss = 0.0, batch_ddim = 0.0, batch_pixel = 0.0, batch_latent = 0.0;
            for (size_t bi = b0; bi < b1; ++bi) {
                const TrainItem& item = items[idx[bi]];
                const int t = sample_training_timestep(cfg, plan, t_rng);
                std::vector<double> noise(item.x0.data.size());
                for (double& v : noise) v = noise_rng.normal();
                Tensor x_t = item.x0;
                x_t.data = diffusion::forward_sample(item.x0.data, t, noise, schedule);

                VarPtr c = den.condition(item.rgb,
                                         den_cfg.use_depth_branch ? &item.refined_norm
                                                                  : nullptr);
                VarPtr pred = den.predict(nn::constant(x_t), t, c);
                VarPtr x0_const = nn::constant(item.x0);
                VarPtr l_latent = mse(pred, x0_const);
                VarPtr yhat = mean_channels(frozen_codec.decode_graph(pred));
                VarPtr l_pixel =
                    nn::pixel_loss_op(yhat, nn::constant(item.gt_norm), cfg.codec_lambda);
                VarPtr loss = add(add(scale_const(l_latent, cfg.train_lambda1),
                                      scale_const(l_pixel, cfg.train_lambda2)),
                                  scale_const(l_latent, cfg.train_lambda3));
                if (!std::isfinite(loss->value.data[0]))
                    throw numeric_error(
                        "train_diffusion: non-finite loss at step " + std::to_string(step) +
                        " (sample " + item.id + ", t=" + std::to_string(t) + ")");
                nn::backward(loss, inv);
                batch_loss += loss->value.data[0] * inv;
                batch_ddim += l_latent->value.data[0] * inv;
                batch_pixel += l_pixel->value.data[0] * inv;
                batch_latent += l_latent->value.data[0] * inv;
            }
            const double lr = cosine_lr(cfg.train_lr, step, total_steps);
            adam.step(den.params(), lr);
            logger.log(step, epoch, batch_loss, batch_ddim, batch_pixel, batch_latent, lr);
            ++step;
        }
    }

    if (frozen_codec.params().checksum() != codec_checksum_before)
        throw numeric_error("train_diffusion: frozen codec parameters changed");

    const auto ckpt = run_dir / "denoiser.ckpt";
    nn::save_checkpoint(ckpt, "denoiser", cfg.to_text(), den.params());
    return ckpt;
}

LoadedCodec load_codec_checkpoint(const std::filesystem::path& path) {
    std::string kind;
    const std::string text = nn::read_checkpoint_config(path, &kind);
    if (kind != "codec") throw input_error("not a codec checkpoint: " + path.string());
    Config cfg;
    cfg.load_text(text);
    LoadedCodec loaded{codec::DepthCodec(codec_config_from(cfg), cfg.train_seed), cfg};
    nn::load_checkpoint(path, "codec", loaded.codec.params());
    return loaded;
}

LoadedDenoiser load_denoiser_checkpoint(const std::filesystem::path& path) {
    std::string kind;
    const std::string text = nn::read_checkpoint_config(path, &kind);
    if (kind != "denoiser") throw input_error("not a denoiser checkpoint: " + path.string());
    Config cfg;
    cfg.load_text(text);
    LoadedDenoiser loaded{denoiser::Denoiser(denoiser_config_from(cfg), cfg.train_seed), cfg};
    nn::load_checkpoint(path, "denoiser", loaded.den.params());
    return loaded;
}

DepthMap infer_sample(const SceneSample& sample, const codec::DepthCodec& codec,
                      const denoiser::Denoiser& den, const Config& cfg, uint64_t seed,
                      int steps_override) {
    if (den.config().max_timestep != cfg.schedule_T)
        throw invalid_argument("infer: timestep plan horizon T=" +
                               std::to_string(cfg.schedule_T) +
                               " inconsistent with trained T=" +
                               std::to_string(den.config().max_timestep));
    const int steps = steps_override > 0 ? steps_override : cfg.infer_steps;
    const auto schedule =
        diffusion::make_schedule(cfg.schedule_T, cfg.schedule_beta_start, cfg.schedule_beta_end);
    const auto plan = diffusion::make_timestep_plan(cfg.schedule_T, steps);
    const auto norm = normalization_from(cfg);

    // Geometry preprocessing feeds the refined branch of the condition.
    Tensor rgb({3, sample.rgb.h, sample.rgb.w});
    rgb.data = sample.rgb.data;
    VarPtr c;
    if (den.config().use_depth_branch) {
        const DepthMap refined = refine_depth(sample, cfg);
        const Tensor refined_norm = normalize_for_condition(refined, norm);
        c = den.condition(rgb, &refined_norm);
    } else {
        c = den.condition(rgb, nullptr);
    }

    const int h4 = sample.rgb.h / 4, w4 = sample.rgb.w / 4;
    Tensor x({den.config().latent_channels, h4, w4});
    Rng rng(Rng::derive(seed, Rng::hash_bytes(sample.id.data(), sample.id.size())));
    for (double& v : x.data) v = rng.normal();

    for (int i = 0; i < plan.count(); ++i) {
        const int t = plan.steps[i];
        const int t_prev = (i + 1 < plan.count()) ? plan.steps[i + 1] : -1;
        const VarPtr pred = den.predict(nn::constant(x), t, c);
        x.data = diffusion::ddim_step(x.data, pred->value.data, t, t_prev, schedule);
    }
    return codec.decode(x, norm);
}

}  // namespace depthdiff::train
