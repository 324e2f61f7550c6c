#pragma once

#include <vector>

#include "vecsketch/geometry.hpp"
#include "vecsketch/rng.hpp"

namespace vecsketch::bezier {

/// Highest degree with precomputed binomial coefficients.
inline constexpr int kMaxDegree = 12;

/// Degree-n Bezier curve given by its n+1 control points, in canvas units.
struct ControlPolygon {
    int degree = 0;
    Polyline points;  // size degree + 1

    ControlPolygon() = default;
    ControlPolygon(int degree_, Polyline points_);

    /// Flattened [x0, y0, x1, y1, ...] layout, the embedding space.
    std::vector<double> flatten() const;
    static ControlPolygon unflatten(const std::vector<double>& values);
};

/// Curve parameters t_i: nondecreasing, t.front() == 0, t.back() == 1.
struct ParamVector {
    std::vector<double> values;

    ParamVector() = default;
    explicit ParamVector(std::vector<double> values_);

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Diagonal 2x2 covariance, canvas units squared.
struct Cov2 {
    double var_x = 0.0;
    double var_y = 0.0;
};

/// Independent per-control-point diagonal Gaussian noise.
struct DiagonalNoise {
    std::vector<Cov2> per_point;

    DiagonalNoise() = default;
    explicit DiagonalNoise(std::vector<Cov2> per_point_);

    /// Same isotropic variance on every control point of a degree-n curve.
    static DiagonalNoise isotropic(int degree, double variance);
};

double binomial(int n, int k);

/// Bernstein basis value C(n,i) t^i (1-t)^(n-i). 0 <= i <= n, t in [0,1].
double bernstein(int i, int n, double t);

/// Point on the curve at t via the Bernstein form.
Vec2 eval_curve(const ControlPolygon& poly, double t);

/// Derivative dC/dt at t.
Vec2 eval_derivative(const ControlPolygon& poly, double t);

/// Second derivative at t.
Vec2 eval_second_derivative(const ControlPolygon& poly, double t);

struct Subdivision {
    Vec2 point;
    ControlPolygon left;
    ControlPolygon right;
};

/// De Casteljau evaluation and subdivision at t. The two halves concatenate
/// to the original curve.
Subdivision decasteljau(const ControlPolygon& poly, double t);

/// Sample the curve at `resolution` uniformly spaced t values in [0,1].
/// Endpoints are exactly P_0 and P_n. resolution >= 2.
Polyline decode_stroke(const ControlPolygon& poly, int resolution);

/// Displace each control point by an independent draw from its diagonal
/// Gaussian. noise.per_point.size() must equal degree + 1.
ControlPolygon perturb(const ControlPolygon& poly, const DiagonalNoise& noise,
                       Rng& rng);

/// Covariance of the curve point at t under control-point noise:
/// sum_i B_{i,n}(t)^2 * Sigma_i.
Cov2 curve_noise_cov(const DiagonalNoise& noise, int degree, double t);

/// Same curve, degree raised by one.
ControlPolygon elevate_degree(const ControlPolygon& poly);

}  // namespace vecsketch::bezier
