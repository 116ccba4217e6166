// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include "depthdiff/core/errors.hpp"
#include "depthdiff/dataset.hpp"
#include "depthdiff/evaluation.hpp"
#include "depthdiff/training.hpp"

namespace depthdiff::eval {
namespace {

MetricsReport eval_checkpoint(const std::filesystem::path& corpus_root,
                              const std::string& split, train::LoadedCodec& codec,
                              train::LoadedDenoiser& den, int steps, Scope scope,
                              Aggregate aggregate, uint64_t seed) {
    const auto ids = data::list_corpus_ids(corpus_root, split);
    const Config& cfg = den.cfg;
    auto loader = [&](const std::string& id) {
        return data::load_sample(corpus_root, data::DatasetKind::synthetic, split + "/" + id,
                                 0, 0, cfg.geo_boundary_threshold);
    };
    auto pipeline = [&](const SceneSample& s) {
        return train::infer_sample(s, codec.codec, den.den, cfg, seed, steps);
    };
    return run_benchmark(ids, loader, pipeline, scope, aggregate).aggregate;
}

// Config equality ignoring the listed keys.
void check_configs_match(const std::string& a, const std::string& b,
                         const std::vector<std::string>& ignored, const std::string& what) {
    auto filter = [&](const std::string& text) {
        std::istringstream in(text);
        std::string line, out;
        while (std::getline(in, line)) {
            bool skip = false;
            for (const auto& key : ignored)
                if (line.rfind(key, 0) == 0) skip = true;
            if (!skip) out += line + "\n";
        }
        return out;
    };
    if (filter(a) != filter(b))
        throw invalid_argument(what + ": checkpoint configs differ beyond " +
                               (ignored.empty() ? "nothing" : ignored[0]));
}

}  // namespace

std::vector<AblationRow> ablate_inference_steps(
    const std::filesystem::path& corpus_root, const std::string& split,
    const std::filesystem::path& codec_ckpt, const std::filesystem::path& base_ckpt,
    const std::vector<int>& counts, const std::map<int, std::filesystem::path>& retrain_ckpts,
    Scope scope, Aggregate aggregate, uint64_t seed) {
    auto codec = train::load_codec_checkpoint(codec_ckpt);
    auto base = train::load_denoiser_checkpoint(base_ckpt);
    base.den.params().set_trainable(false);
    codec.codec.params().set_trainable(false);

    std::vector<AblationRow> rows;
    rows.push_back({"t=" + std::to_string(base.cfg.infer_steps), "",
                    eval_checkpoint(corpus_root, split, codec, base, base.cfg.infer_steps,
                                    scope, aggregate, seed)});

    for (int count : counts)
        rows.push_back({"t=" + std::to_string(count),
                        "Directly change inference without training",
                        eval_checkpoint(corpus_root, split, codec, base, count, scope,
                                        aggregate, seed)});

    if (!retrain_ckpts.empty()) {
        for (int count : counts) {
            auto it = retrain_ckpts.find(count);
            if (it == retrain_ckpts.end())
                throw input_error("ablate_inference_steps: missing retrain checkpoint for t=" +
                                  std::to_string(count));
            auto retrained = train::load_denoiser_checkpoint(it->second);
            retrained.den.params().set_trainable(false);
            if (!retrained.cfg.train_on_plan || retrained.cfg.infer_steps != count)
                throw input_error(
                    "ablate_inference_steps: checkpoint for t=" + std::to_string(count) +
                    " was not trained on a " + std::to_string(count) + "-step plan");
            rows.push_back({"t=" + std::to_string(count), "Train with different inference steps",
                            eval_checkpoint(corpus_root, split, codec, retrained, count, scope,
                                            aggregate, seed)});
        }
    }
    return rows;
}

std::vector<AblationRow> ablate_condition(const std::filesystem::path& corpus_root,
                                          const std::string& split,
                                          const std::filesystem::path& codec_ckpt,
                                          const std::filesystem::path& refined_ckpt,
                                          const std::filesystem::path& rgb_only_ckpt,
                                          Scope scope, Aggregate aggregate, uint64_t seed) {
    auto codec = train::load_codec_checkpoint(codec_ckpt);
    auto refined = train::load_denoiser_checkpoint(refined_ckpt);
    auto rgb_only = train::load_denoiser_checkpoint(rgb_only_ckpt);
    codec.codec.params().set_trainable(false);
    refined.den.params().set_trainable(false);
    rgb_only.den.params().set_trainable(false);

    // Checkpoints must agree on everything except the conditioning inputs.
    // (Passing the same checkpoint twice is a valid sanity run.)
    check_configs_match(refined.cfg.to_text(), rgb_only.cfg.to_text(),
                        {"denoiser.condition_mode"}, "ablate_condition");

    auto label = [](const Config& cfg) {
        return cfg.denoiser_condition_mode == "rgb_only" ? std::string("only-rgb")
                                                         : std::string("refined");
    };
    std::vector<AblationRow> rows;
    rows.push_back({label(refined.cfg), "",
                    eval_checkpoint(corpus_root, split, codec, refined,
                                    refined.cfg.infer_steps, scope, aggregate, seed)});
    rows.push_back({label(rgb_only.cfg), "",
                    eval_checkpoint(corpus_root, split, codec, rgb_only,
                                    rgb_only.cfg.infer_steps, scope, aggregate, seed)});
    return rows;
}

}  // namespace depthdiff::eval
