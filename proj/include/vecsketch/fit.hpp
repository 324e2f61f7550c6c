#pragma once

#include <vector>

#include "vecsketch/bezier.hpp"
#include "vecsketch/sketch.hpp"

namespace vecsketch::oracle {

struct OracleConfig {
    int max_alternations = 50;
    double tolerance = 1e-9;  // stop when the loss delta falls below this
    int footpoint_iterations = 8;
    double ridge = 1e-9;
    bool pin_endpoints = true;
};

/// Sum of squared residuals between the curve at t_i and the stroke points.
double stroke_loss(const bezier::ControlPolygon& poly, const bezier::ParamVector& t,
                   const sketch::Stroke& stroke);

/// t_i proportional to cumulative chord length. Throws Error(Numeric) when
/// all points coincide.
bezier::ParamVector chord_length_params(const sketch::Stroke& stroke);

/// Least-squares control points for fixed t (ridge-damped normal equations
/// in the Bernstein design matrix). With pinning, P_0 and P_n are fixed to
/// the stroke endpoints and only interior points are solved.
bezier::ControlPolygon solve_control_points(const sketch::Stroke& stroke,
                                            const bezier::ParamVector& t, int degree,
                                            bool pin_endpoints, double ridge = 1e-9);

/// Parameter of the closest curve point: safeguarded Newton on [0,1] with a
/// dense grid fallback. Never returns a t worse than t_init.
double footpoint_project(const Vec2& point, const bezier::ControlPolygon& poly,
                         double t_init, int max_iterations = 8);

struct FitOutcome {
    bezier::ControlPolygon poly;
    bezier::ParamVector params;
    double loss = 0.0;
    std::vector<double> loss_history;  // accepted alternations, nonincreasing
    int alternations = 0;
};

/// Two-stage alternating fit: least-squares control points for fixed t,
/// then per-point reprojection of t, repeated to convergence.
FitOutcome alternate_fit(const sketch::Stroke& stroke, int degree,
                         const OracleConfig& config = {});

/// Fits every degree in [degree_min, degree_max]. Each degree also tries a
/// warm start from the previous degree's solution elevated by one, and keeps
/// the better fit, so loss is nonincreasing in the degree.
std::vector<FitOutcome> fit_degree_range(const sketch::Stroke& stroke, int degree_min,
                                         int degree_max, const OracleConfig& config = {});

}  // namespace vecsketch::oracle
