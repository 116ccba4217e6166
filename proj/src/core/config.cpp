// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/core/config.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "depthdiff/core/errors.hpp"

namespace depthdiff {
namespace {

enum class Kind { Int, U64, Double, Bool, Str };

struct Binding {
    const char* key;
    Kind kind;
    size_t offset;
};

#define BIND(key, kind, member) {key, Kind::kind, offsetof(Config, member)}

const Binding kBindings[] = {
    BIND("data.width", Int, data_width),
    BIND("data.height", Int, data_height),
    BIND("data.train", Int, data_train),
    BIND("data.val", Int, data_val),
    BIND("data.test", Int, data_test),
    BIND("data.objects_min", Int, data_objects_min),
    BIND("data.objects_max", Int, data_objects_max),
    BIND("data.table_depth_min", Double, data_table_depth_min),
    BIND("data.table_depth_max", Double, data_table_depth_max),
    BIND("data.hole_prob", Double, data_hole_prob),
    BIND("data.noise_sigma", Double, data_noise_sigma),
    BIND("data.leak_sigma", Double, data_leak_sigma),
    BIND("data.focal", Double, data_focal),
    BIND("norm.d_min", Double, norm_d_min),
    BIND("norm.d_max", Double, norm_d_max),
    BIND("schedule.T", Int, schedule_T),
    BIND("schedule.beta_start", Double, schedule_beta_start),
    BIND("schedule.beta_end", Double, schedule_beta_end),
    BIND("infer.steps", Int, infer_steps),
    BIND("geo.w_obs", Double, geo_w_obs),
    BIND("geo.w_normal", Double, geo_w_normal),
    BIND("geo.w_smooth", Double, geo_w_smooth),
    BIND("geo.boundary_threshold", Double, geo_boundary_threshold),
    BIND("geo.cg_tol", Double, geo_cg_tol),
    BIND("geo.cg_max_iter_factor", Int, geo_cg_max_iter_factor),
    BIND("denoiser.trunk_channels", Int, denoiser_trunk_channels),
    BIND("denoiser.bottleneck_channels", Int, denoiser_bottleneck_channels),
    BIND("denoiser.blocks", Int, denoiser_blocks),
    BIND("denoiser.latent_channels", Int, denoiser_latent_channels),
    BIND("denoiser.cond_channels", Int, denoiser_cond_channels),
    BIND("denoiser.pyr_c1", Int, denoiser_pyr_c1),
    BIND("denoiser.pyr_c2", Int, denoiser_pyr_c2),
    BIND("denoiser.pyr_c3", Int, denoiser_pyr_c3),
    BIND("denoiser.temb_dim", Int, denoiser_temb_dim),
    BIND("denoiser.condition_mode", Str, denoiser_condition_mode),
    BIND("codec.c1", Int, codec_c1),
    BIND("codec.c2", Int, codec_c2),
    BIND("codec.lambda", Double, codec_lambda),
    BIND("codec.latent_reg", Double, codec_latent_reg),
    BIND("train.codec_epochs", Int, train_codec_epochs),
    BIND("train.diffusion_epochs", Int, train_diffusion_epochs),
    BIND("train.batch", Int, train_batch),
    BIND("train.lr", Double, train_lr),
    BIND("train.lambda1", Double, train_lambda1),
    BIND("train.lambda2", Double, train_lambda2),
    BIND("train.lambda3", Double, train_lambda3),
    BIND("train.on_plan", Bool, train_on_plan),
    BIND("train.seed", U64, train_seed),
    BIND("eval.scope", Str, eval_scope),
    BIND("eval.aggregate", Str, eval_aggregate),
};

#undef BIND

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string valid_keys_message() {
    std::ostringstream os;
    os << "valid keys:";
    for (const auto& b : kBindings) os << "\n  " << b.key;
    return os.str();
}

void set_value(Config& cfg, const Binding& b, const std::string& raw) {
    void* p = reinterpret_cast<char*>(&cfg) + b.offset;
    try {
        switch (b.kind) {
            case Kind::Int:
                *static_cast<int*>(p) = std::stoi(raw);
                break;
            case Kind::U64:
                *static_cast<uint64_t*>(p) = std::stoull(raw);
                break;
            case Kind::Double:
                *static_cast<double*>(p) = std::stod(raw);
                break;
            case Kind::Bool: {
                if (raw == "true" || raw == "1")
                    *static_cast<bool*>(p) = true;
                else if (raw == "false" || raw == "0")
                    *static_cast<bool*>(p) = false;
                else
                    throw config_error("boolean key '" + std::string(b.key) +
                                       "' expects true/false, got '" + raw + "'");
                break;
            }
            case Kind::Str:
                *static_cast<std::string*>(p) = raw;
                break;
        }
    } catch (const config_error&) {
        throw;
    } catch (const std::exception&) {
        throw config_error("bad value '" + raw + "' for key '" + b.key + "'");
    }
}

std::string get_value(const Config& cfg, const Binding& b) {
    const void* p = reinterpret_cast<const char*>(&cfg) + b.offset;
    std::ostringstream os;
    os.precision(17);
    switch (b.kind) {
        case Kind::Int: os << *static_cast<const int*>(p); break;
        case Kind::U64: os << *static_cast<const uint64_t*>(p); break;
        case Kind::Double: os << *static_cast<const double*>(p); break;
        case Kind::Bool: os << (*static_cast<const bool*>(p) ? "true" : "false"); break;
        case Kind::Str: os << *static_cast<const std::string*>(p); break;
    }
    return os.str();
}

void apply_pair(Config& cfg, const std::string& key, const std::string& value) {
    for (const auto& b : kBindings) {
        if (key == b.key) {
            set_value(cfg, b, value);
            return;
        }
    }
    throw config_error("unknown config key '" + key + "'\n" + valid_keys_message());
}

}  // namespace

namespace {
void parse_config_stream(Config& cfg, std::istream& in, const std::string& origin) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
        apply_pair(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}
}  // namespace

void Config::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file: " + path.string());
    parse_config_stream(*this, in, path.string());
}

void Config::load_text(const std::string& text) {
    std::istringstream in(text);
    parse_config_stream(*this, in, "<config text>");
}

void Config::apply_override(const std::string& kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
        throw config_error("override must be key=value, got '" + kv + "'");
    apply_pair(*this, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

std::string Config::to_text() const {
    std::ostringstream os;
    for (const auto& b : kBindings) os << b.key << " = " << get_value(*this, b) << "\n";
    return os.str();
}

std::vector<std::string> Config::key_list() {
    std::vector<std::string> keys;
    for (const auto& b : kBindings) keys.emplace_back(b.key);
    return keys;
}

}  // namespace depthdiff
