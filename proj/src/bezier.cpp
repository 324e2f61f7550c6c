#include "vecsketch/bezier.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace vecsketch::bezier {

namespace {

struct BinomialTable {
    std::array<std::array<double, kMaxDegree + 1>, kMaxDegree + 1> c{};

    BinomialTable() {
        for (int n = 0; n <= kMaxDegree; ++n) {
            c[n][0] = c[n][n] = 1.0;
            for (int k = 1; k < n; ++k) c[n][k] = c[n - 1][k - 1] + c[n - 1][k];
        }
    }
};

const BinomialTable& binomials() {
    static const BinomialTable table;
    return table;
}

void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("curve parameter t must lie in [0,1]");
}

void check_degree(int n) {
    if (n < 1 || n > kMaxDegree)
        throw std::invalid_argument("degree must lie in [1, " +
                                    std::to_string(kMaxDegree) + "]");
}

}  // namespace

ControlPolygon::ControlPolygon(int degree_, Polyline points_)
    : degree(degree_), points(std::move(points_)) {
    check_degree(degree);
    if (points.size() != static_cast<std::size_t>(degree + 1))
        throw std::invalid_argument("control polygon needs degree+1 points");
    for (const Vec2& p : points)
        if (!p.finite())
            throw std::invalid_argument("control point coordinates must be finite");
}

std::vector<double> ControlPolygon::flatten() const {
    std::vector<double> out;
    out.reserve(points.size() * 2);
    for (const Vec2& p : points) {
        out.push_back(p.x);
        out.push_back(p.y);
    }
    return out;
}

ControlPolygon ControlPolygon::unflatten(const std::vector<double>& values) {
    if (values.size() < 4 || values.size() % 2 != 0)
        throw std::invalid_argument("flattened polygon needs an even count >= 4");
    Polyline pts(values.size() / 2);
    for (std::size_t i = 0; i < pts.size(); ++i)
        pts[i] = {values[2 * i], values[2 * i + 1]};
    const int degree = static_cast<int>(pts.size()) - 1;
    return ControlPolygon(degree, std::move(pts));
}

ParamVector::ParamVector(std::vector<double> values_) : values(std::move(values_)) {
    if (values.empty()) throw std::invalid_argument("empty parameter vector");
    if (values.front() != 0.0 || values.back() != 1.0)
        throw std::invalid_argument("parameter vector must start at 0 and end at 1");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[i - 1])
            throw std::invalid_argument("parameter vector must be nondecreasing");
}

DiagonalNoise::DiagonalNoise(std::vector<Cov2> per_point_)
    : per_point(std::move(per_point_)) {
    for (const Cov2& c : per_point)
        if (c.var_x < 0.0 || c.var_y < 0.0)
            throw std::invalid_argument("variances must be nonnegative");
}

DiagonalNoise DiagonalNoise::isotropic(int degree, double variance) {
    check_degree(degree);
    return DiagonalNoise(std::vector<Cov2>(degree + 1, Cov2{variance, variance}));
}

double binomial(int n, int k) {
    if (n < 0 || n > kMaxDegree || k < 0 || k > n)
        throw std::out_of_range("binomial index out of range");
    return binomials().c[n][k];
}

double bernstein(int i, int n, double t) {
    if (n < 0 || n > kMaxDegree || i < 0 || i > n)
        throw std::out_of_range("bernstein index out of range");
    check_t(t);
    // Iterative powers keep t=0 and t=1 exact.
    double ti = 1.0;
    for (int k = 0; k < i; ++k) ti *= t;
    double si = 1.0;
    for (int k = 0; k < n - i; ++k) si *= 1.0 - t;
    return binomials().c[n][i] * ti * si;
}

Vec2 eval_curve(const ControlPolygon& poly, double t) {
    check_t(t);
    const int n = poly.degree;
    Vec2 acc{0, 0};
    double ti = 1.0;
    // Running power of t; (1-t)^(n-i) built per term to keep endpoints exact.
    for (int i = 0; i <= n; ++i) {
        double si = 1.0;
        for (int k = 0; k < n - i; ++k) si *= 1.0 - t;
        acc += (binomials().c[n][i] * ti * si) * poly.points[i];
        ti *= t;
    }
    return acc;
}

Vec2 eval_derivative(const ControlPolygon& poly, double t) {
    check_t(t);
    const int n = poly.degree;
    if (n == 1) return poly.points[1] - poly.points[0];
    Polyline hodo(n);
    for (int i = 0; i < n; ++i) hodo[i] = (poly.points[i + 1] - poly.points[i]) * n;
    return eval_curve(ControlPolygon(n - 1, std::move(hodo)), t);
}

Vec2 eval_second_derivative(const ControlPolygon& poly, double t) {
    check_t(t);
    const int n = poly.degree;
    if (n < 2) return {0, 0};
    Polyline hodo(n);
    for (int i = 0; i < n; ++i) hodo[i] = (poly.points[i + 1] - poly.points[i]) * n;
    return eval_derivative(ControlPolygon(n - 1, std::move(hodo)), t);
}

Subdivision decasteljau(const ControlPolygon& poly, double t) {
    check_t(t);
    const int n = poly.degree;
    Polyline work = poly.points;
    Polyline left(n + 1), right(n + 1);
    left[0] = work.front();
    right[n] = work.back();
    for (int level = 1; level <= n; ++level) {
        for (int i = 0; i <= n - level; ++i)
            work[i] = work[i] * (1.0 - t) + work[i + 1] * t;
        left[level] = work[0];
        right[n - level] = work[n - level];
    }
    return Subdivision{work[0], ControlPolygon(n, std::move(left)),
                       ControlPolygon(n, std::move(right))};
}

Polyline decode_stroke(const ControlPolygon& poly, int resolution) {
    if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");
    Polyline out(resolution);
    out.front() = poly.points.front();
    out.back() = poly.points.back();
    for (int k = 1; k < resolution - 1; ++k)
        out[k] = eval_curve(poly, static_cast<double>(k) / (resolution - 1));
    return out;
}

ControlPolygon perturb(const ControlPolygon& poly, const DiagonalNoise& noise,
                       Rng& rng) {
    if (noise.per_point.size() != poly.points.size())
        throw std::invalid_argument("noise dimensions must match degree");
    Polyline pts = poly.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i].x += rng.normal() * std::sqrt(noise.per_point[i].var_x);
        pts[i].y += rng.normal() * std::sqrt(noise.per_point[i].var_y);
    }
    return ControlPolygon(poly.degree, std::move(pts));
}

Cov2 curve_noise_cov(const DiagonalNoise& noise, int degree, double t) {
    check_degree(degree);
    check_t(t);
    if (noise.per_point.size() != static_cast<std::size_t>(degree + 1))
        throw std::invalid_argument("noise dimensions must match degree");
    Cov2 out;
    for (int i = 0; i <= degree; ++i) {
        double b = bernstein(i, degree, t);
        out.var_x += b * b * noise.per_point[i].var_x;
        out.var_y += b * b * noise.per_point[i].var_y;
    }
    return out;
}

ControlPolygon elevate_degree(const ControlPolygon& poly) {
    const int n = poly.degree;
    check_degree(n + 1);
    Polyline out(n + 2);
    out.front() = poly.points.front();
    out.back() = poly.points.back();
    for (int i = 1; i <= n; ++i) {
        double a = static_cast<double>(i) / (n + 1);
        out[i] = poly.points[i - 1] * a + poly.points[i] * (1.0 - a);
    }
    return ControlPolygon(n + 1, std::move(out));
}

}  // namespace vecsketch::bezier
