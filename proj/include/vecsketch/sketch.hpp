#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "vecsketch/geometry.hpp"
#include "vecsketch/rng.hpp"

namespace vecsketch::sketch {

enum class Pen { Down, Up };

/// A digitized sketch: per-sample canvas coordinate plus pen-state bit.
struct RawSketch {
    Polyline points;
    std::vector<Pen> pen;
    std::string category;

    std::size_t size() const { return points.size(); }
    void validate() const;  // throws on empty, length mismatch, non-finite
};

/// One pen-down segment. `offset` is the translation removed by
/// normalize_stroke; (0,0) while the stroke is still in absolute coordinates.
struct Stroke {
    Polyline points;
    Vec2 offset{0, 0};

    std::size_t size() const { return points.size(); }
};

struct StrokeSequence {
    std::vector<Stroke> strokes;
    std::string category;
};

struct ParsedSketches {
    std::vector<RawSketch> sketches;
    std::size_t malformed_lines = 0;   // skipped with a warning
    std::size_t rejected_records = 0;  // parsed but invalid (e.g. empty drawing)
};

/// Quick, Draw! simplified NDJSON: one record per line with a "drawing" array
/// of per-stroke [xs, ys] pairs. The pen bit is set to Up on the last point
/// of every stroke. Category comes from the "word" field when present.
ParsedSketches parse_quickdraw_ndjson(std::istream& in);

/// Stroke-3 rows (dx, dy, pen_lift). Coordinates are the cumulative sum
/// starting at (0,0); pen_lift 1 maps to Pen::Up.
RawSketch parse_stroke3(const std::vector<std::array<double, 3>>& rows);
std::vector<std::array<double, 3>> write_stroke3(const RawSketch& sketch);

struct SegmentResult {
    StrokeSequence sequence;
    std::size_t dropped_single_point = 0;
    std::size_t total_points = 0;  // sum over strokes before dropping
};

/// Split a sketch into strokes after every PenUp sample.
SegmentResult segment_strokes(const RawSketch& sketch);

/// Translate the stroke so its first point is the origin; the removed
/// translation accumulates into `offset`.
Stroke normalize_stroke(const Stroke& stroke);
Stroke denormalize_stroke(const Stroke& stroke);

/// Turning angle in [0, pi] at interior point i, from the two adjacent chords.
double discrete_curvature(const Stroke& stroke, std::size_t i);

/// Cut a stroke so every piece has at most max_len points and at most one
/// interior point with curvature above bend_threshold. Cut points are
/// duplicated as the last point of one piece and the first of the next.
std::vector<Stroke> split_stroke(const Stroke& stroke, std::size_t max_len,
                                 double bend_threshold);

inline constexpr std::size_t kDefaultMaxStrokeLen = 128;
inline constexpr double kDefaultBendThreshold = 2.0943951023931953;  // 2*pi/3

/// Uniformly scale the sketch so its bounding box fits [0,1]^2 (aspect kept),
/// translated to the origin. No-op on degenerate extent.
void scale_to_unit_box(StrokeSequence& seq);

// Internal dataset file: NDJSON, one StrokeSequence per line, version field.
void write_dataset(std::ostream& out, const std::vector<StrokeSequence>& data);
std::vector<StrokeSequence> read_dataset(std::istream& in);

}  // namespace vecsketch::sketch
