// SPDX-License-Identifier: Apache-2.0
#include "depthdiff/nn/params.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include <json.hpp>

#include "depthdiff/core/errors.hpp"

namespace depthdiff::nn {

VarPtr ParamStore::create(const std::string& name, std::vector<int> shape, Rng& rng,
                          double stddev) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.normal() * stddev;
    auto var = leaf(std::move(t), name);
    if (!items_.emplace(name, var).second)
        throw invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    return var;
}

VarPtr ParamStore::create_zeros(const std::string& name, std::vector<int> shape) {
    auto var = leaf(Tensor(std::move(shape)), name);
    if (!items_.emplace(name, var).second)
        throw invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    return var;
}

VarPtr ParamStore::create_full(const std::string& name, std::vector<int> shape, double value) {
    auto var = leaf(Tensor::full(std::move(shape), value), name);
    if (!items_.emplace(name, var).second)
        throw invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    return var;
}

VarPtr ParamStore::get(const std::string& name) const {
    auto it = items_.find(name);
    if (it == items_.end())
        throw invalid_argument("ParamStore: unknown parameter '" + name + "'");
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, var] : items_) {
        var->ensure_grad();
        std::fill(var->grad.data.begin(), var->grad.data.end(), 0.0);
    }
}

void ParamStore::set_trainable(bool trainable) {
    for (auto& [name, var] : items_) {
        var->requires_grad = trainable;
        var->needs = trainable;
    }
}

int64_t ParamStore::total_parameters() const {
    int64_t n = 0;
    for (const auto& [name, var] : items_) n += var->value.numel();
    return n;
}

uint64_t ParamStore::checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [name, var] : items_) {
        mix(name.data(), name.size());
        mix(var->value.data.data(), var->value.data.size() * sizeof(double));
    }
    return h;
}

void AdamOptimizer::step(ParamStore& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, var] : params.items()) {
        if (!var->requires_grad) continue;
        auto it = state_.find(name);
        if (it == state_.end())
            it = state_.emplace(name, std::make_pair(Tensor(var->value.shape),
                                                     Tensor(var->value.shape))).first;
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        var->ensure_grad();
        for (size_t i = 0; i < var->value.data.size(); ++i) {
            const double g = var->grad.data[i];
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            var->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {
constexpr char kMagic[4] = {'D', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::string& config_text, const ParamStore& params) {
    nlohmann::json header;
    header["kind"] = kind;
    header["config"] = config_text;
    auto& tensors = header["tensors"] = nlohmann::json::array();
    for (const auto& [name, var] : params.items()) {
        tensors.push_back({{"name", name}, {"shape", var->value.shape}});
    }
    const std::string htext = header.dump();

    FilePtr f(std::fopen(path.string().c_str(), "wb"));
    if (!f) throw input_error("cannot write checkpoint: " + path.string());
    const uint64_t hlen = htext.size();
    std::fwrite(kMagic, 1, 4, f.get());
    std::fwrite(&kVersion, 4, 1, f.get());
    std::fwrite(&hlen, 8, 1, f.get());
    std::fwrite(htext.data(), 1, htext.size(), f.get());
    for (const auto& [name, var] : params.items()) {
        const auto& d = var->value.data;
        if (std::fwrite(d.data(), sizeof(double), d.size(), f.get()) != d.size())
            throw input_error("short write: " + path.string());
    }
}

namespace {
nlohmann::json read_header(FILE* f, const std::filesystem::path& path) {
    char magic[4];
    uint32_t version = 0;
    uint64_t hlen = 0;
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw input_error("bad checkpoint magic: " + path.string());
    if (std::fread(&version, 4, 1, f) != 1 || version != kVersion)
        throw input_error("unsupported checkpoint version in " + path.string());
    if (std::fread(&hlen, 8, 1, f) != 1)
        throw input_error("truncated checkpoint header: " + path.string());
    std::string htext(hlen, '\0');
    if (std::fread(htext.data(), 1, hlen, f) != hlen)
        throw input_error("truncated checkpoint header: " + path.string());
    try {
        return nlohmann::json::parse(htext);
    } catch (const std::exception& e) {
        throw input_error("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }
}
}  // namespace

std::string load_checkpoint(const std::filesystem::path& path, const std::string& kind,
                            ParamStore& params) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw input_error("cannot open checkpoint: " + path.string());
    const nlohmann::json header = read_header(f.get(), path);
    if (header.value("kind", "") != kind)
        throw input_error("checkpoint kind mismatch in " + path.string() + ": expected '" +
                          kind + "', got '" + header.value("kind", "") + "'");

    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.items().size())
        throw input_error("checkpoint parameter count mismatch in " + path.string());
    for (const auto& entry : tensors) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (!params.has(name))
            throw input_error("checkpoint has unknown parameter '" + name + "'");
        VarPtr var = params.get(name);
        if (var->value.shape != shape)
            throw input_error("checkpoint shape mismatch for '" + name + "': file " +
                              Tensor(shape).shape_str() + " vs model " +
                              var->value.shape_str());
        auto& d = var->value.data;
        if (std::fread(d.data(), sizeof(double), d.size(), f.get()) != d.size())
            throw input_error("truncated checkpoint data: " + path.string());
    }
    return header.value("config", "");
}

std::string read_checkpoint_config(const std::filesystem::path& path, std::string* kind_out) {
    FilePtr f(std::fopen(path.string().c_str(), "rb"));
    if (!f) throw input_error("cannot open checkpoint: " + path.string());
    const nlohmann::json header = read_header(f.get(), path);
    if (kind_out) *kind_out = header.value("kind", "");
    return header.value("config", "");
}

}  // namespace depthdiff::nn
