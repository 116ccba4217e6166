// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "depthdiff/core/rng.hpp"
#include "depthdiff/nn/autodiff.hpp"

namespace depthdiff::nn {

/// Named parameter groups of one network. Map ordering makes iteration, and
/// hence initialization and optimization, deterministic.
class ParamStore {
  public:
    /// Gaussian init with the given standard deviation.
    VarPtr create(const std::string& name, std::vector<int> shape, Rng& rng, double stddev);
    VarPtr create_zeros(const std::string& name, std::vector<int> shape);
    VarPtr create_full(const std::string& name, std::vector<int> shape, double value);

    VarPtr get(const std::string& name) const;
    bool has(const std::string& name) const { return items_.count(name) != 0; }

    const std::map<std::string, VarPtr>& items() const { return items_; }

    void zero_grad();
    void set_trainable(bool trainable);

    int64_t total_parameters() const;

    /// FNV-1a over all parameter bytes in name order.
    uint64_t checksum() const;

  private:
    std::map<std::string, VarPtr> items_;
};

/// Adaptive moment estimation with bias correction.
class AdamOptimizer {
  public:
    AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ParamStore& params, double lr);

  private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::map<std::string, std::pair<Tensor, Tensor>> state_;  // first/second moments
};

/// Versioned checkpoint container: "DDCK" magic, format version, a JSON
/// header carrying the builder kind, the resolved config text, and tensor
/// names + shapes, followed by raw float64 data.
void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::string& config_text, const ParamStore& params);

/// Loads into an existing store built from config; every name and shape
/// must match exactly in both directions. Returns the stored config text.
std::string load_checkpoint(const std::filesystem::path& path, const std::string& kind,
                            ParamStore& params);

/// Reads just the config text of a checkpoint (for compatibility checks).
std::string read_checkpoint_config(const std::filesystem::path& path, std::string* kind_out);

}  // namespace depthdiff::nn
