#pragma once

#include <string>
#include <vector>

#include "vecsketch/bezier.hpp"
#include "vecsketch/geometry.hpp"

namespace vecsketch::svg {

/// A curve positioned on the sketch canvas via its stroke start offset.
struct PlacedCurve {
    bezier::ControlPolygon poly;
    Vec2 offset{0, 0};
};

enum class ExportMode {
    CubicSubdivision,  // degree > 3 subdivided, then one cubic per segment
    Polyline,          // dense sampled polyline
};

struct SvgOptions {
    double canvas_size = 256.0;  // width == height of the output viewBox
    int resolution = 64;         // samples per curve in Polyline mode
    ExportMode mode = ExportMode::CubicSubdivision;
    // Chord-deviation threshold for subdivision, as a fraction of the
    // content bounding-box diagonal.
    double flatness = 1e-3;
    double stroke_width = 1.5;
};

/// Split a curve into segments of degree <= 3. For degree > 3 the curve is
/// recursively halved until each piece's control polygon deviates from its
/// chord by less than `flatness_abs`, then approximated by one cubic with
/// matching endpoints and end tangents.
std::vector<bezier::ControlPolygon> cubic_segments(const bezier::ControlPolygon& poly,
                                                   double flatness_abs);

/// Render curves as an SVG 1.1 document. Throws on empty input or non-finite
/// coordinates. One <path> element per input curve.
std::string to_svg(const std::vector<PlacedCurve>& strokes, const SvgOptions& options);

/// Versioned JSON sidecar for a list of placed curves:
/// {"version":1,"strokes":[{"degree":n,"offset":[x,y],"points":[[x,y],...]}]}
std::string curves_to_json(const std::vector<PlacedCurve>& strokes);
std::vector<PlacedCurve> curves_from_json(const std::string& text);

/// Minimal element-level builder shared by to_svg and the fitting-snapshot
/// renderer.
class SvgBuilder {
  public:
    SvgBuilder(double width, double height);

    void path(const std::string& d, const std::string& color, double width);
    void polyline(const Polyline& pts, const std::string& color, double width);
    void circle(const Vec2& center, double radius, const std::string& color);
    void line(const Vec2& a, const Vec2& b, const std::string& color, double width);
    void comment(const std::string& text);
    /// Arbitrary key=value pair recorded in an svg <metadata> block.
    void metadata(const std::string& key, const std::string& value);

    std::string str() const;

  private:
    double width_;
    double height_;
    std::vector<std::string> body_;
    std::vector<std::string> meta_;
};

std::string format_number(double v);

}  // namespace vecsketch::svg
