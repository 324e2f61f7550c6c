#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vecsketch/rng.hpp"

namespace vecsketch::diff {

/// Dense row-major tensor of doubles. Rank 1 or 2 is all the graph needs.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(int rows, int cols, std::vector<double> values);
    /// Uniform init in [-bound, bound].
    static Tensor uniform(std::vector<int> shape, double bound, Rng& rng);

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const { return shape.at(0); }
    int cols() const { return rank() == 2 ? shape.at(1) : 1; }
    bool is_scalar() const { return numel() == 1; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool finite() const;

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const {
        return data[static_cast<std::size_t>(r) * cols() + c];
    }

    std::string shape_str() const;
};

}  // namespace vecsketch::diff
