#include "vecsketch/svg.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::svg {

namespace {

using bezier::ControlPolygon;

double chord_deviation(const ControlPolygon& poly) {
    const Vec2 a = poly.points.front();
    const Vec2 b = poly.points.back();
    const Vec2 ab = b - a;
    const double len2 = ab.norm2();
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < poly.points.size(); ++i) {
        const Vec2 ap = poly.points[i] - a;
        double d;
        if (len2 < 1e-30) {
            d = ap.norm();
        } else {
            // Distance to the chord segment, clamped to its endpoints.
            double s = std::clamp(ap.dot(ab) / len2, 0.0, 1.0);
            d = (ap - ab * s).norm();
        }
        worst = std::max(worst, d);
    }
    return worst;
}

ControlPolygon cubic_from_tangents(const ControlPolygon& poly) {
    const int n = poly.degree;
    const Vec2 p0 = poly.points.front();
    const Vec2 p3 = poly.points.back();
    // Matches C'(0) = n(Q1-Q0) and C'(1) = n(Qn-Qn-1) of the source curve.
    const Vec2 p1 = p0 + (poly.points[1] - p0) * (n / 3.0);
    const Vec2 p2 = p3 + (poly.points[n - 1] - p3) * (n / 3.0);
    return ControlPolygon(3, {p0, p1, p2, p3});
}

void collect_cubics(const ControlPolygon& poly, double flatness_abs, int depth,
                    std::vector<ControlPolygon>& out) {
    if (depth > 24 || chord_deviation(poly) < flatness_abs) {
        out.push_back(cubic_from_tangents(poly));
        return;
    }
    auto sub = bezier::decasteljau(poly, 0.5);
    collect_cubics(sub.left, flatness_abs, depth + 1, out);
    collect_cubics(sub.right, flatness_abs, depth + 1, out);
}

Bounds content_bounds(const std::vector<PlacedCurve>& strokes) {
    Polyline all;
    for (const PlacedCurve& s : strokes)
        for (const Vec2& p : bezier::decode_stroke(s.poly, 32)) all.push_back(p + s.offset);
    return Bounds::of(all);
}

}  // namespace

std::string format_number(double v) {
    if (!std::isfinite(v)) throw Error(ErrorCategory::Numeric, "non-finite SVG coordinate");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    // Trim trailing zeros, keep at least one digit after the point removed.
    std::string s(buf);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

std::vector<ControlPolygon> cubic_segments(const ControlPolygon& poly,
                                           double flatness_abs) {
    if (poly.degree <= 3) return {poly};
    std::vector<ControlPolygon> out;
    collect_cubics(poly, flatness_abs, 0, out);
    return out;
}

SvgBuilder::SvgBuilder(double width, double height) : width_(width), height_(height) {}

void SvgBuilder::path(const std::string& d, const std::string& color, double width) {
    body_.push_back("  <path d=\"" + d + "\" fill=\"none\" stroke=\"" + color +
                    "\" stroke-width=\"" + format_number(width) +
                    "\" stroke-linecap=\"round\"/>");
}

void SvgBuilder::polyline(const Polyline& pts, const std::string& color, double width) {
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        d += (i == 0 ? "M" : " L");
        d += format_number(pts[i].x) + " " + format_number(pts[i].y);
    }
    path(d, color, width);
}

void SvgBuilder::circle(const Vec2& center, double radius, const std::string& color) {
    body_.push_back("  <circle cx=\"" + format_number(center.x) + "\" cy=\"" +
                    format_number(center.y) + "\" r=\"" + format_number(radius) +
                    "\" fill=\"" + color + "\"/>");
}

void SvgBuilder::line(const Vec2& a, const Vec2& b, const std::string& color,
                      double width) {
    body_.push_back("  <line x1=\"" + format_number(a.x) + "\" y1=\"" +
                    format_number(a.y) + "\" x2=\"" + format_number(b.x) + "\" y2=\"" +
                    format_number(b.y) + "\" stroke=\"" + color + "\" stroke-width=\"" +
                    format_number(width) + "\"/>");
}

void SvgBuilder::comment(const std::string& text) {
    body_.push_back("  <!-- " + text + " -->");
}

void SvgBuilder::metadata(const std::string& key, const std::string& value) {
    meta_.push_back("    <" + key + ">" + value + "</" + key + ">");
}

std::string SvgBuilder::str() const {
    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\""
        << format_number(width_) << "\" height=\"" << format_number(height_)
        << "\" viewBox=\"0 0 " << format_number(width_) << " " << format_number(height_)
        << "\">\n";
    if (!meta_.empty()) {
        out << "  <metadata>\n";
        for (const std::string& m : meta_) out << m << "\n";
        out << "  </metadata>\n";
    }
    for (const std::string& b : body_) out << b << "\n";
    out << "</svg>\n";
    return out.str();
}

std::string to_svg(const std::vector<PlacedCurve>& strokes, const SvgOptions& options) {
    if (strokes.empty())
        throw Error(ErrorCategory::Config, "cannot render an empty stroke list");
    for (const PlacedCurve& s : strokes) {
        if (!s.offset.finite())
            throw Error(ErrorCategory::Numeric, "non-finite stroke offset");
        for (const Vec2& p : s.poly.points)
            if (!p.finite())
                throw Error(ErrorCategory::Numeric, "non-finite control point");
    }

    Bounds bounds = content_bounds(strokes);
    const double margin = 0.05 * options.canvas_size;
    const double extent = std::max({bounds.width(), bounds.height(), 1e-9});
    const double scale = (options.canvas_size - 2.0 * margin) / extent;
    const Vec2 center{(bounds.lo.x + bounds.hi.x) / 2.0, (bounds.lo.y + bounds.hi.y) / 2.0};
    const double half = options.canvas_size / 2.0;
    auto map = [&](const Vec2& p) -> Vec2 {
        return {(p.x - center.x) * scale + half, (p.y - center.y) * scale + half};
    };

    SvgBuilder builder(options.canvas_size, options.canvas_size);
    const double flatness_abs = options.flatness * std::max(bounds.diagonal(), 1e-9);
    for (const PlacedCurve& s : strokes) {
        std::string d;
        if (options.mode == ExportMode::Polyline) {
            Polyline pts = bezier::decode_stroke(s.poly, options.resolution);
            for (std::size_t i = 0; i < pts.size(); ++i) {
                Vec2 q = map(pts[i] + s.offset);
                d += (i == 0 ? "M" : " L");
                d += format_number(q.x) + " " + format_number(q.y);
            }
        } else {
            auto segments = cubic_segments(s.poly, flatness_abs);
            Vec2 start = map(segments.front().points.front() + s.offset);
            d = "M" + format_number(start.x) + " " + format_number(start.y);
            for (const ControlPolygon& seg : segments) {
                if (seg.degree == 1) {
                    Vec2 p1 = map(seg.points[1] + s.offset);
                    d += " L" + format_number(p1.x) + " " + format_number(p1.y);
                } else if (seg.degree == 2) {
                    Vec2 p1 = map(seg.points[1] + s.offset);
                    Vec2 p2 = map(seg.points[2] + s.offset);
                    d += " Q" + format_number(p1.x) + " " + format_number(p1.y) + " " +
                         format_number(p2.x) + " " + format_number(p2.y);
                } else {
                    Vec2 p1 = map(seg.points[1] + s.offset);
                    Vec2 p2 = map(seg.points[2] + s.offset);
                    Vec2 p3 = map(seg.points[3] + s.offset);
                    d += " C" + format_number(p1.x) + " " + format_number(p1.y) + " " +
                         format_number(p2.x) + " " + format_number(p2.y) + " " +
                         format_number(p3.x) + " " + format_number(p3.y);
                }
            }
        }
        builder.path(d, "#1a1a1a", options.stroke_width);
    }
    return builder.str();
}

std::string curves_to_json(const std::vector<PlacedCurve>& strokes) {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["strokes"] = nlohmann::json::array();
    for (const PlacedCurve& s : strokes) {
        nlohmann::json rec;
        rec["degree"] = s.poly.degree;
        rec["offset"] = {s.offset.x, s.offset.y};
        nlohmann::json pts = nlohmann::json::array();
        for (const Vec2& p : s.poly.points) pts.push_back({p.x, p.y});
        rec["points"] = std::move(pts);
        doc["strokes"].push_back(std::move(rec));
    }
    return doc.dump();
}

std::vector<PlacedCurve> curves_from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::Io, std::string("bad curve JSON: ") + e.what());
    }
    if (!doc.contains("version") || doc["version"].get<int>() != 1)
        throw Error(ErrorCategory::Io, "unsupported curve JSON version");
    std::vector<PlacedCurve> out;
    for (const auto& rec : doc.at("strokes")) {
        PlacedCurve c;
        int degree = rec.at("degree").get<int>();
        c.offset = {rec.at("offset").at(0).get<double>(), rec.at("offset").at(1).get<double>()};
        Polyline pts;
        for (const auto& p : rec.at("points"))
            pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        c.poly = bezier::ControlPolygon(degree, std::move(pts));
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace vecsketch::svg
