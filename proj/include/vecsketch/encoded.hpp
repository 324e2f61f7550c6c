#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vecsketch/bezier.hpp"
#include "vecsketch/rng.hpp"
#include "vecsketch/svg.hpp"

namespace vecsketch::sketch {

/// One stroke in Bezier form: origin-based control polygon, canvas start
/// location, and the per-point-normalized reconstruction loss of the fit.
struct EncodedStroke {
    bezier::ControlPolygon poly;
    Vec2 offset{0, 0};
    double loss = 0.0;
};

struct EncodedSketch {
    std::vector<EncodedStroke> strokes;
    std::string category;
};

/// Data augmentation: displace every control point by scale * N(0, I_2).
/// The first point stays pinned to the origin; its displacement moves into
/// the stroke offset so absolute positions see full-variance noise.
EncodedSketch augment_control_points(const EncodedSketch& sketch, double scale,
                                     Rng& rng);

std::vector<svg::PlacedCurve> to_placed_curves(const EncodedSketch& sketch);

// Encoded dataset file: NDJSON records
// {"version":1,"category":...,"strokes":[{"degree","offset","points","loss"}]}
void write_encoded_dataset(std::ostream& out, const std::vector<EncodedSketch>& data);
std::vector<EncodedSketch> read_encoded_dataset(std::istream& in);

}  // namespace vecsketch::sketch
