#pragma once

#include <vector>

#include "vecsketch/bezier.hpp"
#include "vecsketch/rng.hpp"
#include "vecsketch/sketch.hpp"

namespace vecsketch::synthetic {

struct StrokeSpec {
    int degree = 3;
    int num_points = 32;
    double noise_stddev = 0.0;  // per-coordinate Gaussian on sampled points
    bool arc_length_sampling = true;
    double t_jitter = 0.25;  // fraction of a uniform step
};

/// Smooth random control polygon: a bounded random walk from the origin with
/// limited turning, rescaled to roughly unit extent. P_0 is always (0,0).
bezier::ControlPolygon random_polygon(int degree, Rng& rng);

/// Parameter values used to sample a stroke from a curve: t_1 = 0, t_N = 1,
/// interior values arc-length-biased (or uniform) plus jitter.
std::vector<double> sample_params(const bezier::ControlPolygon& poly,
                                  const StrokeSpec& spec, Rng& rng);

/// Stroke sampled from the polygon per spec, re-normalized so the first
/// point is exactly the origin even under noise.
sketch::Stroke sample_stroke(const bezier::ControlPolygon& poly,
                             const StrokeSpec& spec, Rng& rng);

sketch::Stroke random_stroke(const StrokeSpec& spec, Rng& rng);

std::vector<sketch::Stroke> make_strokes(const StrokeSpec& spec, std::size_t count,
                                         Rng& rng);

}  // namespace vecsketch::synthetic
