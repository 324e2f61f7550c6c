#include "vecsketch/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "vecsketch/error.hpp"

namespace vecsketch::oracle {

using bezier::ControlPolygon;
using bezier::ParamVector;

double stroke_loss(const ControlPolygon& poly, const ParamVector& t,
                   const sketch::Stroke& stroke) {
    if (t.size() != stroke.size())
        throw std::invalid_argument("parameter/point count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        acc += (bezier::eval_curve(poly, t[i]) - stroke.points[i]).norm2();
    return acc;
}

ParamVector chord_length_params(const sketch::Stroke& stroke) {
    if (stroke.size() < 2)
        throw std::invalid_argument("stroke must have at least 2 points");
    std::vector<double> cum(stroke.size(), 0.0);
    for (std::size_t i = 1; i < stroke.size(); ++i)
        cum[i] = cum[i - 1] + (stroke.points[i] - stroke.points[i - 1]).norm();
    if (cum.back() <= 0.0)
        throw Error(ErrorCategory::Numeric, "zero-length stroke has no chord params");
    std::vector<double> t(stroke.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = cum[i] / cum.back();
    t.front() = 0.0;
    t.back() = 1.0;
    return ParamVector(std::move(t));
}

ControlPolygon solve_control_points(const sketch::Stroke& stroke, const ParamVector& t,
                                    int degree, bool pin_endpoints, double ridge) {
    const int n = degree;
    const auto N = static_cast<int>(stroke.size());
    if (t.size() != stroke.size())
        throw std::invalid_argument("parameter/point count mismatch");
    if (N < n + 1)
        throw std::invalid_argument("need at least degree+1 points to solve");

    if (pin_endpoints && n == 1)
        return ControlPolygon(1, {stroke.points.front(), stroke.points.back()});

    const int first_free = pin_endpoints ? 1 : 0;
    const int free_count = pin_endpoints ? n - 1 : n + 1;

    Eigen::MatrixXd design(N, free_count);
    Eigen::MatrixXd rhs(N, 2);
    for (int i = 0; i < N; ++i) {
        Vec2 target = stroke.points[i];
        if (pin_endpoints) {
            target -= stroke.points.front() * bezier::bernstein(0, n, t[i]);
            target -= stroke.points.back() * bezier::bernstein(n, n, t[i]);
        }
        rhs(i, 0) = target.x;
        rhs(i, 1) = target.y;
        for (int k = 0; k < free_count; ++k)
            design(i, k) = bezier::bernstein(first_free + k, n, t[i]);
    }

    Eigen::MatrixXd normal = design.transpose() * design;
    normal.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
    if (ldlt.info() != Eigen::Success)
        throw Error(ErrorCategory::Numeric, "normal equations not solvable");
    Eigen::MatrixXd solution = ldlt.solve(design.transpose() * rhs);
    if (!solution.allFinite())
        throw Error(ErrorCategory::Numeric,
                    "rank-deficient fit beyond ridge rescue");

    Polyline pts(n + 1);
    if (pin_endpoints) {
        pts.front() = stroke.points.front();
        pts.back() = stroke.points.back();
    }
    for (int k = 0; k < free_count; ++k)
        pts[first_free + k] = {solution(k, 0), solution(k, 1)};
    return ControlPolygon(n, std::move(pts));
}

namespace {

double residual2(const Vec2& point, const ControlPolygon& poly, double t) {
    return (bezier::eval_curve(poly, t) - point).norm2();
}

}  // namespace

double footpoint_project(const Vec2& point, const ControlPolygon& poly, double t_init,
                         int max_iterations) {
    if (!(t_init >= 0.0 && t_init <= 1.0))
        throw std::invalid_argument("t_init must lie in [0,1]");
    double best_t = t_init;
    double best_f = residual2(point, poly, t_init);

    double t = t_init;
    for (int it = 0; it < max_iterations; ++it) {
        Vec2 d = bezier::eval_curve(poly, t) - point;
        Vec2 c1 = bezier::eval_derivative(poly, t);
        Vec2 c2 = bezier::eval_second_derivative(poly, t);
        double g = 2.0 * d.dot(c1);
        double h = 2.0 * (c1.norm2() + d.dot(c2));
        double step = (h > 1e-12) ? -g / h : (g > 0 ? -0.1 : 0.1);
        // Backtrack until the step improves, bisecting inside [0,1].
        bool moved = false;
        for (int bt = 0; bt < 4; ++bt) {
            double cand = std::clamp(t + step, 0.0, 1.0);
            double f = residual2(point, poly, cand);
            if (f < best_f) {
                best_f = f;
                best_t = cand;
                t = cand;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
        if (std::fabs(g) < 1e-14) break;
    }

    // Grid fallback when Newton stalled away from any progress.
    if (best_t == t_init) {
        const int grid = 128;
        for (int k = 0; k <= grid; ++k) {
            double cand = static_cast<double>(k) / grid;
            double f = residual2(point, poly, cand);
            if (f < best_f) {
                best_f = f;
                best_t = cand;
            }
        }
        // One Newton polish from the best grid cell.
        if (best_t != t_init)
            return footpoint_project(point, poly, best_t, max_iterations);
    }
    return best_t;
}

namespace {

FitOutcome alternate_from(const sketch::Stroke& stroke, int degree,
                          ControlPolygon poly, std::vector<double> t,
                          const OracleConfig& config) {
    const std::size_t N = stroke.size();
    double loss = stroke_loss(poly, ParamVector(t), stroke);
    FitOutcome out;
    out.loss_history.push_back(loss);

    std::vector<double> best_t = t;
    ControlPolygon best_poly = poly;
    double best_loss = loss;

    for (int it = 0; it < config.max_alternations; ++it) {
        // Reproject each interior point, keeping improvements only, then
        // restore monotonicity (running max).
        std::vector<double> next_t = best_t;
        for (std::size_t i = 1; i + 1 < N; ++i) {
            double cand = footpoint_project(stroke.points[i], best_poly, best_t[i],
                                            config.footpoint_iterations);
            if (residual2(stroke.points[i], best_poly, cand) <=
                residual2(stroke.points[i], best_poly, best_t[i]))
                next_t[i] = cand;
        }
        next_t.front() = 0.0;
        next_t.back() = 1.0;
        for (std::size_t i = 1; i < N; ++i)
            next_t[i] = std::max(next_t[i], next_t[i - 1]);
        for (std::size_t i = 0; i < N; ++i) next_t[i] = std::min(next_t[i], 1.0);

        ControlPolygon next_poly = solve_control_points(
            stroke, ParamVector(next_t), degree, config.pin_endpoints, config.ridge);
        double next_loss = stroke_loss(next_poly, ParamVector(next_t), stroke);

        if (next_loss > best_loss - config.tolerance) {
            if (next_loss < best_loss) {
                best_loss = next_loss;
                best_poly = next_poly;
                best_t = next_t;
                out.loss_history.push_back(best_loss);
                ++out.alternations;
            }
            break;
        }
        best_loss = next_loss;
        best_poly = std::move(next_poly);
        best_t = std::move(next_t);
        out.loss_history.push_back(best_loss);
        ++out.alternations;
    }

    out.poly = std::move(best_poly);
    out.params = ParamVector(std::move(best_t));
    out.loss = best_loss;
    return out;
}

}  // namespace

FitOutcome alternate_fit(const sketch::Stroke& stroke, int degree,
                         const OracleConfig& config) {
    if (stroke.size() < static_cast<std::size_t>(degree + 1))
        throw std::invalid_argument("stroke shorter than degree+1");
    ParamVector t0 = chord_length_params(stroke);
    ControlPolygon p0 =
        solve_control_points(stroke, t0, degree, config.pin_endpoints, config.ridge);
    return alternate_from(stroke, degree, std::move(p0), t0.values, config);
}

std::vector<FitOutcome> fit_degree_range(const sketch::Stroke& stroke, int degree_min,
                                         int degree_max, const OracleConfig& config) {
    if (degree_min < 1 || degree_max < degree_min)
        throw std::invalid_argument("bad degree range");
    std::vector<FitOutcome> out;
    for (int n = degree_min; n <= degree_max; ++n) {
        FitOutcome cold = alternate_fit(stroke, n, config);
        if (!out.empty()) {
            FitOutcome warm = alternate_from(stroke, n,
                                             bezier::elevate_degree(out.back().poly),
                                             out.back().params.values, config);
            if (warm.loss < cold.loss) cold = std::move(warm);
        }
        out.push_back(std::move(cold));
    }
    return out;
}

}  // namespace vecsketch::oracle
