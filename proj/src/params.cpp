#include "vecsketch/params.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::diff {

int ParamStore::add(const std::string& name, Tensor init) {
    if (by_name_.count(name))
        throw Error(ErrorCategory::Model, "duplicate parameter name: " + name);
    Entry e;
    e.name = name;
    e.grad = Tensor::zeros(init.shape);
    e.m = Tensor::zeros(init.shape);
    e.v = Tensor::zeros(init.shape);
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    int slot = static_cast<int>(entries_.size()) - 1;
    by_name_[name] = slot;
    return slot;
}

int ParamStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
}

void ParamStore::zero_grad() {
    for (Entry& e : entries_)
        std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

double ParamStore::grad_norm() const {
    double acc = 0.0;
    for (const Entry& e : entries_)
        for (double g : e.grad.data) acc += g * g;
    return std::sqrt(acc);
}

void ParamStore::clip_grad_norm(double max_norm) {
    double norm = grad_norm();
    if (norm <= max_norm || norm == 0.0) return;
    double s = max_norm / norm;
    for (Entry& e : entries_)
        for (double& g : e.grad.data) g *= s;
}

void ParamStore::check_gradients_finite() const {
    for (const Entry& e : entries_)
        if (!e.grad.finite())
            throw Error(ErrorCategory::Numeric,
                        "non-finite gradient in parameter " + e.name);
}

void ParamStore::sgd_step(double lr) {
    check_gradients_finite();
    for (Entry& e : entries_)
        for (std::size_t i = 0; i < e.value.data.size(); ++i)
            e.value.data[i] -= lr * e.grad.data[i];
    ++step_;
    zero_grad();
}

void ParamStore::adam_step(const AdamConfig& config) {
    check_gradients_finite();
    ++step_;
    double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step_));
    for (Entry& e : entries_) {
        for (std::size_t i = 0; i < e.value.data.size(); ++i) {
            double g = e.grad.data[i];
            double& m = e.m.data[i];
            double& v = e.v.data[i];
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g * g;
            e.value.data[i] -=
                config.lr * (m / bc1) / (std::sqrt(v / bc2) + config.eps);
        }
    }
    zero_grad();
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.value.numel();
    return n;
}

void ParamStore::save_checkpoint(const std::string& path,
                                 const std::string& config_hash,
                                 const std::string& tag) const {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["config_hash"] = config_hash;
    doc["tag"] = tag;
    doc["step"] = step_;
    doc["params"] = nlohmann::json::array();
    for (const Entry& e : entries_) {
        nlohmann::json p;
        p["name"] = e.name;
        p["shape"] = e.value.shape;
        p["values"] = e.value.data;
        p["m"] = e.m.data;
        p["v"] = e.v.data;
        doc["params"].push_back(std::move(p));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCategory::Io, "cannot write checkpoint " + path);
    out << doc.dump();
}

std::string ParamStore::load_checkpoint(const std::string& path,
                                        const std::string& expected_config_hash) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCategory::Io, "cannot read checkpoint " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Io, std::string("bad checkpoint: ") + e.what());
    }
    if (doc.value("version", 0) != 1)
        throw Error(ErrorCategory::Model, "unsupported checkpoint version");
    if (!expected_config_hash.empty() &&
        doc.value("config_hash", "") != expected_config_hash)
        throw Error(ErrorCategory::Model,
                    "checkpoint config hash mismatch: expected " +
                        expected_config_hash + ", found " +
                        doc.value("config_hash", "<missing>"));
    entries_.clear();
    by_name_.clear();
    step_ = doc.value("step", 0L);
    for (const auto& p : doc.at("params")) {
        Entry e;
        e.name = p.at("name").get<std::string>();
        auto shape = p.at("shape").get<std::vector<int>>();
        e.value = Tensor(shape, p.at("values").get<std::vector<double>>());
        e.grad = Tensor::zeros(shape);
        e.m = Tensor(shape, p.at("m").get<std::vector<double>>());
        e.v = Tensor(shape, p.at("v").get<std::vector<double>>());
        by_name_[e.name] = static_cast<int>(entries_.size());
        entries_.push_back(std::move(e));
    }
    return doc.value("tag", "");
}

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace vecsketch::diff
