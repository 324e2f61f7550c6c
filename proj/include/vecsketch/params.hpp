#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "vecsketch/tensor.hpp"

namespace vecsketch::diff {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Named trainable tensors with accumulated gradients and Adam moments.
class ParamStore {
  public:
    int add(const std::string& name, Tensor init);
    int find(const std::string& name) const;  // -1 if absent
    std::size_t size() const { return entries_.size(); }

    Tensor& value(int slot) { return entries_[slot].value; }
    const Tensor& value(int slot) const { return entries_[slot].value; }
    Tensor& grad(int slot) { return entries_[slot].grad; }
    const Tensor& grad(int slot) const { return entries_[slot].grad; }
    const std::string& name(int slot) const { return entries_[slot].name; }
    long step_count() const { return step_; }

    void zero_grad();
    double grad_norm() const;
    /// Scales gradients down so their global norm is at most max_norm.
    void clip_grad_norm(double max_norm);

    /// Plain SGD update; clears gradients. Throws Error(Numeric) on a
    /// non-finite gradient, leaving parameters untouched.
    void sgd_step(double lr);
    /// Adam with bias correction; clears gradients. Same non-finite contract.
    void adam_step(const AdamConfig& config);

    std::size_t parameter_count() const;

    /// Versioned JSON checkpoint with optimizer state and a config hash that
    /// load_checkpoint verifies.
    void save_checkpoint(const std::string& path, const std::string& config_hash,
                         const std::string& tag) const;
    /// Returns the stored tag. Throws Error(Model) on hash mismatch.
    std::string load_checkpoint(const std::string& path,
                                const std::string& expected_config_hash);

  private:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
        Tensor m;  // Adam first moment
        Tensor v;  // Adam second moment
    };

    void check_gradients_finite() const;

    std::vector<Entry> entries_;
    std::unordered_map<std::string, int> by_name_;
    long step_ = 0;
};

/// FNV-1a hash of a string, hex-encoded; used for config and input hashes.
std::string fnv1a_hex(const std::string& text);

}  // namespace vecsketch::diff
