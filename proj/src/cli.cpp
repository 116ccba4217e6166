// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "depthdiff/core/config.hpp"
#include "depthdiff/core/errors.hpp"
#include "depthdiff/dataset.hpp"
#include "depthdiff/evaluation.hpp"
#include "depthdiff/geometry.hpp"
#include "depthdiff/io/image_io.hpp"
#include "depthdiff/plot.hpp"
#include "depthdiff/training.hpp"

namespace depthdiff::cli {
namespace {

namespace fs = std::filesystem;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Config file (key = value lines)");
    cmd->add_option("--set", opts.overrides, "Config override key=value (repeatable)");
}

// Precedence: defaults < checkpoint config < --config file < --set overrides.
Config resolve_config(const CommonOpts& opts, const std::string& base_text = "") {
    Config cfg;
    if (!base_text.empty()) cfg.load_text(base_text);
    if (!opts.config_path.empty()) cfg.load_file(opts.config_path);
    for (const auto& kv : opts.overrides) cfg.apply_override(kv);
    return cfg;
}

fs::path prepare_run_dir(const fs::path& dir, const Config& cfg,
                         const std::string& run_info = "") {
    fs::create_directories(dir);
    std::ofstream out(dir / "resolved.cfg");
    if (!out) throw input_error("cannot write " + (dir / "resolved.cfg").string());
    out << cfg.to_text();
    if (!run_info.empty()) {
        std::ofstream info(dir / "run_info.txt");
        info << run_info << "\n";
    }
    return dir;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

SceneSample load_synthetic(const fs::path& corpus, const std::string& split,
                           const std::string& id, const Config& cfg) {
    return data::load_sample(corpus, data::DatasetKind::synthetic, split + "/" + id, 0, 0,
                             cfg.geo_boundary_threshold);
}

int cmd_show_config(const CommonOpts& opts, bool reference) {
    if (reference) {
        std::cout << reference_text();
        return 0;
    }
    std::cout << resolve_config(opts).to_text();
    return 0;
}

int cmd_gen_data(const CommonOpts& opts, const std::string& out, uint64_t seed) {
    Config cfg = resolve_config(opts);
    const auto spec = data::SynthSpec::from_config(cfg);
    data::generate_corpus(out, spec, cfg.data_train, cfg.data_val, cfg.data_test, seed);
    prepare_run_dir(out, cfg, "subcommand = gen-data\nseed = " + std::to_string(seed));
    std::cout << "corpus written to " << out << " (" << cfg.data_train << "/" << cfg.data_val
              << "/" << cfg.data_test << " samples)\n";
    return 0;
}

int cmd_preprocess(const CommonOpts& opts, const std::string& corpus, const std::string& out,
                   const std::string& splits_csv) {
    Config cfg = resolve_config(opts);
    prepare_run_dir(out, cfg, "subcommand = preprocess\ncorpus = " + corpus);
    for (const auto& split : split_list(splits_csv)) {
        const auto ids = data::list_corpus_ids(corpus, split);
        fs::create_directories(fs::path(out) / split);
        for (const auto& id : ids) {
            const SceneSample s = load_synthetic(corpus, split, id, cfg);
            const DepthMap refined = train::refine_depth(s, cfg);
            io::save_depth_png(fs::path(out) / split / (id + ".png"), refined);
        }
        std::cout << "refined " << ids.size() << " samples in split '" << split << "'\n";
    }
    return 0;
}

int cmd_train_codec(const CommonOpts& opts, const std::string& corpus,
                    const std::string& out) {
    Config cfg = resolve_config(opts);
    prepare_run_dir(out, cfg, "subcommand = train-codec\ncorpus = " + corpus);
    auto items = train::load_train_items(corpus, "train", cfg, "");
    const auto ckpt = train::train_codec_stage(items, cfg, out);
    std::cout << "codec checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_train_diffusion(const CommonOpts& opts, const std::string& corpus,
                        const std::string& codec_ckpt, const std::string& refined,
                        const std::string& out, const std::string& init_ckpt) {
    Config cfg = resolve_config(opts);
    auto loaded = train::load_codec_checkpoint(codec_ckpt);
    if (loaded.cfg.denoiser_latent_channels != cfg.denoiser_latent_channels ||
        loaded.cfg.norm_d_min != cfg.norm_d_min || loaded.cfg.norm_d_max != cfg.norm_d_max)
        throw config_error("codec checkpoint latent/normalization settings disagree with the "
                           "requested config");
    prepare_run_dir(out, cfg, "subcommand = train-diffusion\ncorpus = " + corpus +
                                  "\ncodec = " + codec_ckpt);
    const bool needs_refined = cfg.denoiser_condition_mode == "refined";
    if (needs_refined && refined.empty())
        throw input_error("train-diffusion: --refined DIR is required in refined mode");
    auto items = train::load_train_items(corpus, "train", cfg,
                                         needs_refined ? fs::path(refined) : fs::path());
    const auto ckpt = train::train_diffusion_stage(items, loaded.codec, cfg, out,
                                                   init_ckpt.empty() ? fs::path()
                                                                     : fs::path(init_ckpt));
    std::cout << "denoiser checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_infer(const CommonOpts& opts, const std::string& corpus, const std::string& split,
              const std::string& codec_ckpt, const std::string& denoiser_ckpt,
              const std::string& out, uint64_t seed, const std::string& only_id, int steps) {
    auto den = train::load_denoiser_checkpoint(denoiser_ckpt);
    Config cfg = resolve_config(opts, den.cfg.to_text());
    auto codec = train::load_codec_checkpoint(codec_ckpt);
    codec.codec.params().set_trainable(false);
    den.den.params().set_trainable(false);
    prepare_run_dir(out, cfg, "subcommand = infer\nseed = " + std::to_string(seed) +
                                  "\ndenoiser = " + denoiser_ckpt);

    auto ids = only_id.empty() ? data::list_corpus_ids(corpus, split)
                               : std::vector<std::string>{only_id};
    fs::create_directories(fs::path(out) / "pred" / split);
    for (const auto& id : ids) {
        const SceneSample s = load_synthetic(corpus, split, id, cfg);
        const DepthMap pred = train::infer_sample(s, codec.codec, den.den, cfg, seed, steps);
        io::save_depth_png(fs::path(out) / "pred" / split / (id + ".png"), pred);
        io::save_float_container(fs::path(out) / "pred" / split / (id + ".ddf"), pred.h,
                                 pred.w, 1, pred.values);
    }
    std::cout << "predictions for " << ids.size() << " samples in " << out << "/pred/"
              << split << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& corpus, const std::string& split,
             const std::string& pred_dir, const std::string& codec_ckpt,
             const std::string& denoiser_ckpt, const std::string& baseline,
             const std::string& out, uint64_t seed) {
    Config cfg;
    std::optional<train::LoadedCodec> codec;
    std::optional<train::LoadedDenoiser> den;
    if (!denoiser_ckpt.empty()) {
        den = train::load_denoiser_checkpoint(denoiser_ckpt);
        cfg = resolve_config(opts, den->cfg.to_text());
        if (codec_ckpt.empty()) throw input_error("eval: --codec required with --denoiser");
        codec = train::load_codec_checkpoint(codec_ckpt);
        codec->codec.params().set_trainable(false);
        den->den.params().set_trainable(false);
    } else {
        cfg = resolve_config(opts);
        if (pred_dir.empty() && baseline.empty())
            throw input_error("eval: need --pred, --baseline, or --denoiser/--codec");
    }

    const auto scope = eval::parse_scope(cfg.eval_scope);
    const auto aggregate = eval::parse_aggregate(cfg.eval_aggregate);
    const auto ids = data::list_corpus_ids(corpus, split);

    auto loader = [&](const std::string& id) { return load_synthetic(corpus, split, id, cfg); };
    std::function<DepthMap(const SceneSample&)> pipeline;
    std::string source;
    if (!pred_dir.empty()) {
        source = "predictions in " + pred_dir;
        pipeline = [&, pred_dir](const SceneSample& s) {
            const auto file = fs::path(pred_dir) / "pred" / (s.id + ".png");
            const auto flat = fs::path(pred_dir) / (s.id + ".png");
            return io::load_depth_png(fs::exists(file) ? file : flat);
        };
    } else if (baseline == "raw") {
        source = "raw sensor depth";
        pipeline = [](const SceneSample& s) { return s.raw_depth; };
    } else if (baseline == "refined") {
        source = "global-optimization refined depth";
        pipeline = [&](const SceneSample& s) { return train::refine_depth(s, cfg); };
    } else if (!baseline.empty()) {
        throw input_error("eval: unknown baseline '" + baseline + "' (raw|refined)");
    } else {
        source = "diffusion pipeline";
        pipeline = [&](const SceneSample& s) {
            return train::infer_sample(s, codec->codec, den->den, cfg, seed);
        };
    }

    const auto result = eval::run_benchmark(ids, loader, pipeline, scope, aggregate);
    if (!out.empty()) {
        prepare_run_dir(out, cfg, "subcommand = eval\nseed = " + std::to_string(seed) +
                                      "\nsource = " + source);
        std::ofstream(fs::path(out) / "report.json") << eval::benchmark_json(result);
        std::ofstream(fs::path(out) / "report.txt")
            << eval::benchmark_table("eval of " + source, result);
    }
    std::cout << eval::benchmark_table("eval of " + source, result);
    for (const auto& f : result.failures) std::cerr << "sample failed: " << f << "\n";
    if (result.failure_fraction() > 0.01) {
        std::cerr << "more than 1% of samples failed\n";
        return 4;
    }
    return 0;
}

int cmd_ablate_steps(const CommonOpts& opts, const std::string& corpus,
                     const std::string& split, const std::string& codec_ckpt,
                     const std::string& base_ckpt, const std::string& counts_csv,
                     const std::vector<std::string>& retrain_kv, const std::string& out,
                     uint64_t seed) {
    Config cfg = resolve_config(opts);
    std::vector<int> counts;
    for (const auto& c : split_list(counts_csv)) counts.push_back(std::stoi(c));
    std::map<int, fs::path> retrain;
    for (const auto& kv : retrain_kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw input_error("--retrain expects count=path, got '" + kv + "'");
        retrain[std::stoi(kv.substr(0, eq))] = kv.substr(eq + 1);
    }
    const auto rows = eval::ablate_inference_steps(
        corpus, split, codec_ckpt, base_ckpt, counts, retrain,
        eval::parse_scope(cfg.eval_scope), eval::parse_aggregate(cfg.eval_aggregate), seed);
    const auto table = eval::ablation_table("Ablation on inference settings", rows);
    if (!out.empty()) {
        prepare_run_dir(out, cfg, "subcommand = ablate-steps\nseed = " + std::to_string(seed));
        std::ofstream(fs::path(out) / "ablation.json")
            << eval::ablation_json("inference_steps", rows);
        std::ofstream(fs::path(out) / "ablation.txt") << table;
    }
    std::cout << table;
    return 0;
}

int cmd_ablate_condition(const CommonOpts& opts, const std::string& corpus,
                         const std::string& split, const std::string& codec_ckpt,
                         const std::string& refined_ckpt, const std::string& rgb_ckpt,
                         const std::string& out, uint64_t seed) {
    Config cfg = resolve_config(opts);
    const auto rows = eval::ablate_condition(corpus, split, codec_ckpt, refined_ckpt, rgb_ckpt,
                                             eval::parse_scope(cfg.eval_scope),
                                             eval::parse_aggregate(cfg.eval_aggregate), seed);
    const auto table = eval::ablation_table("Ablation on conditioning", rows);
    if (!out.empty()) {
        prepare_run_dir(out, cfg, "subcommand = ablate-condition\nseed = " + std::to_string(seed));
        std::ofstream(fs::path(out) / "ablation.json") << eval::ablation_json("condition", rows);
        std::ofstream(fs::path(out) / "ablation.txt") << table;
    }
    std::cout << table;
    return 0;
}

int cmd_plot(const CommonOpts& opts, const std::string& ablation_json_path,
             const std::string& corpus, const std::string& split, const std::string& id,
             const std::string& pred_dir, const std::string& out) {
    Config cfg = resolve_config(opts);
    fs::create_directories(out);
    bool did_anything = false;

    if (!ablation_json_path.empty()) {
        std::ifstream in(ablation_json_path);
        if (!in) throw input_error("cannot open " + ablation_json_path);
        nlohmann::json j;
        in >> j;
        std::map<std::string, plot::Curve> curves;
        for (const auto& row : j.at("rows")) {
            const std::string label = row.at("label").get<std::string>();
            if (label.rfind("t=", 0) != 0) continue;
            std::string section = row.value("section", "");
            if (section.empty()) section = "baseline";
            auto& curve = curves[section];
            curve.label = section.substr(0, 7);
            curve.xs.push_back(std::stod(label.substr(2)));
            curve.ys.push_back(row.at("rmse").get<double>());
        }
        std::vector<plot::Curve> list;
        for (auto& [name, curve] : curves)
            if (curve.xs.size() >= 1) list.push_back(curve);
        if (!list.empty()) {
            plot::save_line_chart(fs::path(out) / "rmse_vs_steps.png", list,
                                  "RMSE vs inference steps");
            std::cout << "wrote " << (fs::path(out) / "rmse_vs_steps.png") << "\n";
            did_anything = true;
        }
    }

    if (!corpus.empty() && !id.empty()) {
        const SceneSample s = load_synthetic(corpus, split, id, cfg);
        plot::save_depth_heatmap(fs::path(out) / (id + "_gt.png"), s.gt_depth);
        plot::save_depth_heatmap(fs::path(out) / (id + "_raw.png"), s.raw_depth);
        if (!pred_dir.empty()) {
            const auto file = fs::path(pred_dir) / "pred" / split / (id + ".png");
            const DepthMap pred = io::load_depth_png(
                fs::exists(file) ? file : fs::path(pred_dir) / split / (id + ".png"));
            plot::save_depth_heatmap(fs::path(out) / (id + "_pred.png"), pred);
            plot::save_error_heatmap(fs::path(out) / (id + "_error.png"), pred, s.gt_depth,
                                     &s.mask);
        }
        std::cout << "wrote heatmaps for " << split << "/" << id << " to " << out << "\n";
        did_anything = true;
    }
    if (!did_anything) throw input_error("plot: nothing to do (need --ablation or --id)");
    return 0;
}

}  // namespace

std::string reference_text() {
    std::ostringstream os;
    os << "depthdiff reference\n===================\n\n";
    os << "Subcommands\n-----------\n"
          "  show-config      print resolved config (--reference prints this page)\n"
          "  gen-data         generate the synthetic corpus       (--out DIR --seed N)\n"
          "  preprocess       refined depth maps for a corpus     (--corpus --out [--splits])\n"
          "  train-codec      stage 1: depth codec                (--corpus --out)\n"
          "  train-diffusion  stage 2: conditioned denoiser       (--corpus --codec --refined --out)\n"
          "  infer            run the pipeline on a split         (--corpus --split --codec --denoiser --out)\n"
          "  eval             metrics report                      (--corpus --split plus --pred | --baseline | ckpts)\n"
          "  ablate-steps     inference-step ablation table       (--corpus --codec --base --counts [--retrain c=ckpt])\n"
          "  ablate-condition conditioning ablation table         (--corpus --codec --refined-ckpt --rgb-ckpt)\n"
          "  plot             curves and heatmaps                 (--ablation | --corpus --id [--pred])\n\n";
    os << "Common flags\n------------\n"
          "  --config FILE    config file of key = value lines\n"
          "  --set key=value  override one key (repeatable)\n"
          "  precedence: defaults < checkpoint config < --config < --set\n\n";
    os << "Exit codes\n----------\n"
          "  0 success, 2 config error, 3 missing input, 4 numerical failure, 1 other\n\n";
    os << "Run directories\n---------------\n"
          "  every run directory holds resolved.cfg plus the artifacts of its\n"
          "  subcommand: corpus splits (gen-data), <split>/<id>.png refined maps\n"
          "  (preprocess), *.ckpt + *_train_log.jsonl (training), pred/<split>/<id>.png\n"
          "  and .ddf (infer), report.json/report.txt (eval), ablation.json/.txt\n"
          "  (ablations). File formats are documented in docs/FORMATS.md.\n\n";
    os << "Config keys\n-----------\n";
    for (const auto& key : Config::key_list()) os << "  " << key << "\n";
    return os.str();
}

int run(int argc, const char* const* argv) {
    CLI::App app{"transparent-object depth completion via conditioned latent diffusion"};
    app.require_subcommand(1);

    CommonOpts opts;
    bool reference = false;
    std::string corpus, out, splits = "train,val,test", split = "test";
    std::string codec_ckpt, denoiser_ckpt, refined_dir, pred_dir, baseline, only_id;
    std::string counts_csv = "2,5,10,15", base_ckpt, refined_ckpt, rgb_ckpt, ablation_path;
    std::string init_ckpt_flag;
    std::vector<std::string> retrain_kv;
    uint64_t seed = 1;
    int steps = 0;

    auto* show = app.add_subcommand("show-config", "print resolved configuration");
    add_common(show, opts);
    show->add_flag("--reference", reference, "print the full CLI/config reference page");

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic corpus");
    add_common(gen, opts);
    gen->add_option("--out", out, "corpus directory")->required();
    gen->add_option("--seed", seed, "corpus seed");

    auto* prep = app.add_subcommand("preprocess", "global-optimization refined depth maps");
    add_common(prep, opts);
    prep->add_option("--corpus", corpus, "corpus root")->required();
    prep->add_option("--out", out, "run directory")->required();
    prep->add_option("--splits", splits, "comma-separated splits (default all)");

    auto* tc = app.add_subcommand("train-codec", "train the depth codec");
    add_common(tc, opts);
    tc->add_option("--corpus", corpus, "corpus root")->required();
    tc->add_option("--out", out, "run directory")->required();

    auto* td = app.add_subcommand("train-diffusion", "train the conditioned denoiser");
    add_common(td, opts);
    td->add_option("--corpus", corpus, "corpus root")->required();
    td->add_option("--codec", codec_ckpt, "codec checkpoint")->required();
    td->add_option("--refined", refined_dir, "preprocess run directory");
    td->add_option("--init", init_ckpt_flag, "warm-start from an existing denoiser checkpoint");
    td->add_option("--out", out, "run directory")->required();

    auto* inf = app.add_subcommand("infer", "run the diffusion pipeline over a split");
    add_common(inf, opts);
    inf->add_option("--corpus", corpus, "corpus root")->required();
    inf->add_option("--split", split, "split name (default test)");
    inf->add_option("--codec", codec_ckpt, "codec checkpoint")->required();
    inf->add_option("--denoiser", denoiser_ckpt, "denoiser checkpoint")->required();
    inf->add_option("--out", out, "run directory")->required();
    inf->add_option("--seed", seed, "noise seed");
    inf->add_option("--id", only_id, "single sample id");
    inf->add_option("--steps", steps, "override inference step count");

    auto* ev = app.add_subcommand("eval", "benchmark metrics report");
    add_common(ev, opts);
    ev->add_option("--corpus", corpus, "corpus root")->required();
    ev->add_option("--split", split, "split name (default test)");
    ev->add_option("--pred", pred_dir, "infer run directory to evaluate");
    ev->add_option("--codec", codec_ckpt, "codec checkpoint (inline inference)");
    ev->add_option("--denoiser", denoiser_ckpt, "denoiser checkpoint (inline inference)");
    ev->add_option("--baseline", baseline, "evaluate a baseline instead: raw|refined");
    ev->add_option("--out", out, "run directory for reports");
    ev->add_option("--seed", seed, "noise seed for inline inference");

    auto* abs = app.add_subcommand("ablate-steps", "inference-step ablation");
    add_common(abs, opts);
    abs->add_option("--corpus", corpus, "corpus root")->required();
    abs->add_option("--split", split, "split name (default test)");
    abs->add_option("--codec", codec_ckpt, "codec checkpoint")->required();
    abs->add_option("--base", base_ckpt, "base denoiser checkpoint")->required();
    abs->add_option("--counts", counts_csv, "comma-separated step counts");
    abs->add_option("--retrain", retrain_kv, "count=checkpoint for retrain rows (repeatable)");
    abs->add_option("--out", out, "run directory");
    abs->add_option("--seed", seed, "noise seed");

    auto* abc = app.add_subcommand("ablate-condition", "conditioning ablation");
    add_common(abc, opts);
    abc->add_option("--corpus", corpus, "corpus root")->required();
    abc->add_option("--split", split, "split name (default test)");
    abc->add_option("--codec", codec_ckpt, "codec checkpoint")->required();
    abc->add_option("--refined-ckpt", refined_ckpt, "refined-condition checkpoint")->required();
    abc->add_option("--rgb-ckpt", rgb_ckpt, "rgb-only checkpoint")->required();
    abc->add_option("--out", out, "run directory");
    abc->add_option("--seed", seed, "noise seed");

    auto* pl = app.add_subcommand("plot", "error curves and depth/error heatmaps");
    add_common(pl, opts);
    pl->add_option("--ablation", ablation_path, "ablation.json to plot");
    pl->add_option("--corpus", corpus, "corpus root (for heatmaps)");
    pl->add_option("--split", split, "split name (default test)");
    pl->add_option("--id", only_id, "sample id (for heatmaps)");
    pl->add_option("--pred", pred_dir, "infer run directory (for pred/error heatmaps)");
    pl->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (show->parsed()) return cmd_show_config(opts, reference);
        if (gen->parsed()) return cmd_gen_data(opts, out, seed);
        if (prep->parsed()) return cmd_preprocess(opts, corpus, out, splits);
        if (tc->parsed()) return cmd_train_codec(opts, corpus, out);
        if (td->parsed())
            return cmd_train_diffusion(opts, corpus, codec_ckpt, refined_dir, out,
                                       init_ckpt_flag);
        if (inf->parsed())
            return cmd_infer(opts, corpus, split, codec_ckpt, denoiser_ckpt, out, seed,
                             only_id, steps);
        if (ev->parsed())
            return cmd_eval(opts, corpus, split, pred_dir, codec_ckpt, denoiser_ckpt, baseline,
                            out, seed);
        if (abs->parsed())
            return cmd_ablate_steps(opts, corpus, split, codec_ckpt, base_ckpt, counts_csv,
                                    retrain_kv, out, seed);
        if (abc->parsed())
            return cmd_ablate_condition(opts, corpus, split, codec_ckpt, refined_ckpt, rgb_ckpt,
                                        out, seed);
        if (pl->parsed())
            return cmd_plot(opts, ablation_path, corpus, split, only_id, pred_dir, out);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid arguments: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("depthdiff");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace depthdiff::cli
