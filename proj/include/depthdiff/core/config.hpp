// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace depthdiff {

/// Every tunable of the pipeline, with desk-scale defaults. Serialized as
/// flat `key = value` text; unknown keys are rejected with the valid list.
struct Config {
    // Synthetic corpus generation
    int data_width = 64;
    int data_height = 48;
    int data_train = 512;
    int data_val = 64;
    int data_test = 64;
    int data_objects_min = 1;
    int data_objects_max = 5;
    double data_table_depth_min = 0.7;   // meters
    double data_table_depth_max = 1.4;
    double data_hole_prob = 0.85;        // dropout probability inside the mask
    double data_noise_sigma = 0.012;     // additive noise on leaked depth, meters
    double data_leak_sigma = 0.02;       // refraction-like offset magnitude, meters
    double data_focal = 70.0;            // pixels, at data_width

    // Depth normalization (sigmoid decoder range)
    double norm_d_min = 0.2;
    double norm_d_max = 2.0;

    // Diffusion noise schedule
    int schedule_T = 1000;
    double schedule_beta_start = 1e-4;
    double schedule_beta_end = 0.02;
    int infer_steps = 20;

    // Global-optimization depth refiner
    double geo_w_obs = 1000.0;
    double geo_w_normal = 1.0;
    double geo_w_smooth = 1.0;
    double geo_boundary_threshold = 0.04;  // meters
    double geo_cg_tol = 1e-8;
    int geo_cg_max_iter_factor = 10;       // max iterations = factor * H * W

    // Denoiser
    int denoiser_trunk_channels = 64;
    int denoiser_bottleneck_channels = 16;
    int denoiser_blocks = 4;
    int denoiser_latent_channels = 4;
    int denoiser_cond_channels = 32;
    int denoiser_pyr_c1 = 8;
    int denoiser_pyr_c2 = 16;
    int denoiser_pyr_c3 = 24;
    int denoiser_temb_dim = 32;
    std::string denoiser_condition_mode = "refined";  // refined | rgb_only

    // Depth codec
    int codec_c1 = 16;
    int codec_c2 = 32;
    double codec_lambda = 0.5;       // pixel-loss second-moment weight
    double codec_latent_reg = 1e-4;  // latent L2 regularizer during codec training

    // Training
    int train_codec_epochs = 48;
    int train_diffusion_epochs = 32;
    int train_batch = 8;
    double train_lr = 2e-4;
    double train_lambda1 = 1.0;   // latent prediction loss
    double train_lambda2 = 0.1;   // decoded pixel loss
    double train_lambda3 = 0.1;   // latent L2 term
    bool train_on_plan = false;   // sample timesteps from the inference plan
    uint64_t train_seed = 1;

    // Evaluation
    std::string eval_scope = "transparent_only";     // transparent_only | all_pixels
    std::string eval_aggregate = "pixel_weighted";   // pixel_weighted | per_sample

    /// Parses `key = value` lines from a file into *this. '#' starts a
    /// comment. Throws config_error on unknown keys or bad values.
    void load_file(const std::filesystem::path& path);

    /// Same parser over an in-memory string (e.g. a checkpoint's stored config).
    void load_text(const std::string& text);

    /// Applies a single "key=value" override string.
    void apply_override(const std::string& kv);

    /// Serializes every key with its current value, one per line.
    std::string to_text() const;

    /// All valid keys in declaration order.
    static std::vector<std::string> key_list();
};

}  // namespace depthdiff
