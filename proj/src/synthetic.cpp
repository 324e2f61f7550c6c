#include "vecsketch/synthetic.hpp"

#include <algorithm>
#include <cmath>

namespace vecsketch::synthetic {

bezier::ControlPolygon random_polygon(int degree, Rng& rng) {
    Polyline pts(degree + 1);
    pts[0] = {0, 0};
    double heading = rng.uniform(0.0, 2.0 * M_PI);
    for (int i = 1; i <= degree; ++i) {
        double step = rng.uniform(0.08, 0.30);
        pts[i] = pts[i - 1] + Vec2{step * std::cos(heading), step * std::sin(heading)};
        heading += rng.uniform(-1.0, 1.0);  // about +-57 degrees per leg
    }
    Bounds b = Bounds::of(pts);
    double extent = std::max({b.width(), b.height(), 1e-9});
    double scale = rng.uniform(0.5, 1.0) / extent;
    for (Vec2& p : pts) p = p * scale;
    return bezier::ControlPolygon(degree, std::move(pts));
}

std::vector<double> sample_params(const bezier::ControlPolygon& poly,
                                  const StrokeSpec& spec, Rng& rng) {
    const int n = spec.num_points;
    std::vector<double> ts(n);
    ts.front() = 0.0;
    ts.back() = 1.0;
    if (spec.arc_length_sampling) {
        // Invert cumulative chord length on a dense sampling of the curve.
        const int dense = 256;
        Polyline pts = bezier::decode_stroke(poly, dense);
        std::vector<double> cum(dense, 0.0);
        for (int i = 1; i < dense; ++i)
            cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
        double total = cum.back();
        for (int i = 1; i + 1 < n; ++i) {
            double frac = (i + rng.uniform(-spec.t_jitter, spec.t_jitter)) / (n - 1);
            frac = std::clamp(frac, 0.0, 1.0);
            double target = frac * total;
            auto it = std::lower_bound(cum.begin(), cum.end(), target);
            std::size_t k = std::min<std::size_t>(it - cum.begin(), dense - 1);
            ts[i] = static_cast<double>(k) / (dense - 1);
        }
    } else {
        for (int i = 1; i + 1 < n; ++i) {
            double frac = (i + rng.uniform(-spec.t_jitter, spec.t_jitter)) / (n - 1);
            ts[i] = std::clamp(frac, 0.0, 1.0);
        }
    }
    std::sort(ts.begin(), ts.end());
    return ts;
}

sketch::Stroke sample_stroke(const bezier::ControlPolygon& poly,
                             const StrokeSpec& spec, Rng& rng) {
    std::vector<double> ts = sample_params(poly, spec, rng);
    sketch::Stroke stroke;
    stroke.points.reserve(ts.size());
    for (double t : ts) {
        Vec2 p = bezier::eval_curve(poly, t);
        if (spec.noise_stddev > 0.0) {
            p.x += rng.normal() * spec.noise_stddev;
            p.y += rng.normal() * spec.noise_stddev;
        }
        stroke.points.push_back(p);
    }
    return sketch::normalize_stroke(stroke);
}

sketch::Stroke random_stroke(const StrokeSpec& spec, Rng& rng) {
    return sample_stroke(random_polygon(spec.degree, rng), spec, rng);
}

std::vector<sketch::Stroke> make_strokes(const StrokeSpec& spec, std::size_t count,
                                         Rng& rng) {
    std::vector<sketch::Stroke> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(random_stroke(spec, rng));
    return out;
}

}  // namespace vecsketch::synthetic
