#include "vecsketch/sketch.hpp"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::sketch {

void RawSketch::validate() const {
    if (points.empty()) throw Error(ErrorCategory::Io, "empty sketch");
    if (points.size() != pen.size())
        throw Error(ErrorCategory::Io, "point/pen length mismatch");
    for (const Vec2& p : points)
        if (!p.finite()) throw Error(ErrorCategory::Io, "non-finite coordinate");
}

ParsedSketches parse_quickdraw_ndjson(std::istream& in) {
    ParsedSketches out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            ++out.malformed_lines;
            continue;
        }
        if (!rec.contains("drawing") || !rec["drawing"].is_array() ||
            rec["drawing"].empty()) {
            ++out.rejected_records;
            continue;
        }
        RawSketch sketch;
        if (rec.contains("word") && rec["word"].is_string())
            sketch.category = rec["word"].get<std::string>();
        bool ok = true;
        for (const auto& stroke : rec["drawing"]) {
            if (!stroke.is_array() || stroke.size() < 2 || !stroke[0].is_array() ||
                stroke[0].size() != stroke[1].size() || stroke[0].empty()) {
                ok = false;
                break;
            }
            for (std::size_t i = 0; i < stroke[0].size(); ++i) {
                double x = stroke[0][i].get<double>();
                double y = stroke[1][i].get<double>();
                if (!std::isfinite(x) || !std::isfinite(y)) {
                    ok = false;
                    break;
                }
                sketch.points.push_back({x, y});
                sketch.pen.push_back(Pen::Down);
            }
            if (!ok) break;
            sketch.pen.back() = Pen::Up;
        }
        if (!ok || sketch.points.empty()) {
            ++out.rejected_records;
            continue;
        }
        out.sketches.push_back(std::move(sketch));
    }
    return out;
}

RawSketch parse_stroke3(const std::vector<std::array<double, 3>>& rows) {
    if (rows.empty()) throw Error(ErrorCategory::Io, "empty stroke-3 input");
    RawSketch sketch;
    Vec2 pos{0, 0};
    for (const auto& row : rows) {
        if (!std::isfinite(row[0]) || !std::isfinite(row[1]))
            throw Error(ErrorCategory::Io, "non-finite stroke-3 row");
        if (row[2] != 0.0 && row[2] != 1.0)
            throw Error(ErrorCategory::Io, "stroke-3 pen bit must be 0 or 1");
        pos += Vec2{row[0], row[1]};
        sketch.points.push_back(pos);
        sketch.pen.push_back(row[2] == 1.0 ? Pen::Up : Pen::Down);
    }
    return sketch;
}

std::vector<std::array<double, 3>> write_stroke3(const RawSketch& sketch) {
    sketch.validate();
    std::vector<std::array<double, 3>> rows;
    rows.reserve(sketch.size());
    Vec2 prev{0, 0};
    for (std::size_t i = 0; i < sketch.size(); ++i) {
        Vec2 d = sketch.points[i] - prev;
        rows.push_back({d.x, d.y, sketch.pen[i] == Pen::Up ? 1.0 : 0.0});
        prev = sketch.points[i];
    }
    return rows;
}

SegmentResult segment_strokes(const RawSketch& sketch) {
    sketch.validate();
    SegmentResult out;
    out.sequence.category = sketch.category;
    Stroke current;
    auto flush = [&] {
        out.total_points += current.points.size();
        if (current.points.size() >= 2)
            out.sequence.strokes.push_back(std::move(current));
        else if (current.points.size() == 1)
            ++out.dropped_single_point;
        current = Stroke{};
    };
    for (std::size_t i = 0; i < sketch.size(); ++i) {
        current.points.push_back(sketch.points[i]);
        if (sketch.pen[i] == Pen::Up) flush();
    }
    if (!current.points.empty()) flush();  // trailing stroke without PenUp
    return out;
}

Stroke normalize_stroke(const Stroke& stroke) {
    if (stroke.size() < 2)
        throw Error(ErrorCategory::Io, "stroke too short to normalize");
    Stroke out;
    Vec2 origin = stroke.points.front();
    out.offset = stroke.offset + origin;
    out.points.reserve(stroke.size());
    for (const Vec2& p : stroke.points) out.points.push_back(p - origin);
    return out;
}

Stroke denormalize_stroke(const Stroke& stroke) {
    Stroke out;
    out.points.reserve(stroke.size());
    for (const Vec2& p : stroke.points) out.points.push_back(p + stroke.offset);
    return out;
}

double discrete_curvature(const Stroke& stroke, std::size_t i) {
    if (i == 0 || i + 1 >= stroke.size())
        throw std::out_of_range("curvature is defined at interior points only");
    Vec2 a = stroke.points[i] - stroke.points[i - 1];
    Vec2 b = stroke.points[i + 1] - stroke.points[i];
    if (a.norm2() == 0.0 || b.norm2() == 0.0) return 0.0;
    return std::atan2(std::fabs(a.cross(b)), a.dot(b));
}

namespace {

Stroke slice(const Stroke& stroke, std::size_t first, std::size_t last) {
    Stroke out;
    out.offset = stroke.offset;
    out.points.assign(stroke.points.begin() + first, stroke.points.begin() + last + 1);
    return out;
}

// Cut [first, last] into chunks of at most max_len points, duplicating the
// boundary point between consecutive chunks.
void chunk_by_length(const Stroke& stroke, std::size_t first, std::size_t last,
                     std::size_t max_len, std::vector<Stroke>& out) {
    while (last - first + 1 > max_len) {
        std::size_t cut = first + max_len - 1;
        out.push_back(slice(stroke, first, cut));
        first = cut;
    }
    out.push_back(slice(stroke, first, last));
}

}  // namespace

std::vector<Stroke> split_stroke(const Stroke& stroke, std::size_t max_len,
                                 double bend_threshold) {
    if (max_len < 2) throw std::invalid_argument("max_len must be >= 2");
    if (stroke.size() < 2) throw Error(ErrorCategory::Io, "stroke too short to split");

    // A piece keeps one sharp bend; the next sharp bend becomes a cut point,
    // turning it into a shared endpoint rather than a second interior corner.
    std::vector<Stroke> pieces;
    std::size_t start = 0;
    bool have_bend = false;
    for (std::size_t i = 1; i + 1 < stroke.size(); ++i) {
        if (discrete_curvature(stroke, i) <= bend_threshold) continue;
        if (have_bend && i > start + 1) {
            chunk_by_length(stroke, start, i, max_len, pieces);
            start = i;
            have_bend = false;
        } else {
            have_bend = true;
        }
    }
    chunk_by_length(stroke, start, stroke.size() - 1, max_len, pieces);
    return pieces;
}

void scale_to_unit_box(StrokeSequence& seq) {
    Polyline all;
    for (const Stroke& s : seq.strokes)
        for (const Vec2& p : s.points) all.push_back(p + s.offset);
    if (all.empty()) return;
    Bounds b = Bounds::of(all);
    double extent = std::max(b.width(), b.height());
    if (extent <= 0.0) return;
    for (Stroke& s : seq.strokes) {
        Vec2 shifted_offset = (s.offset - b.lo) * (1.0 / extent);
        for (Vec2& p : s.points) p = p * (1.0 / extent);
        s.offset = shifted_offset;
    }
}

void write_dataset(std::ostream& out, const std::vector<StrokeSequence>& data) {
    for (const StrokeSequence& seq : data) {
        nlohmann::json rec;
        rec["version"] = 1;
        rec["category"] = seq.category;
        rec["strokes"] = nlohmann::json::array();
        for (const Stroke& s : seq.strokes) {
            nlohmann::json sj;
            sj["offset"] = {s.offset.x, s.offset.y};
            nlohmann::json pts = nlohmann::json::array();
            for (const Vec2& p : s.points) pts.push_back({p.x, p.y});
            sj["points"] = std::move(pts);
            rec["strokes"].push_back(std::move(sj));
        }
        out << rec.dump() << "\n";
    }
}

std::vector<StrokeSequence> read_dataset(std::istream& in) {
    std::vector<StrokeSequence> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Io, "dataset line " + std::to_string(line_no) +
                                               ": " + e.what());
        }
        if (rec.value("version", 0) != 1)
            throw Error(ErrorCategory::Io, "unsupported dataset version");
        StrokeSequence seq;
        seq.category = rec.value("category", "");
        for (const auto& sj : rec.at("strokes")) {
            Stroke s;
            s.offset = {sj.at("offset").at(0).get<double>(),
                        sj.at("offset").at(1).get<double>()};
            for (const auto& p : sj.at("points")) {
                Vec2 v{p.at(0).get<double>(), p.at(1).get<double>()};
                if (!v.finite())
                    throw Error(ErrorCategory::Io, "non-finite coordinate in dataset");
                s.points.push_back(v);
            }
            if (s.points.size() < 2)
                throw Error(ErrorCategory::Io, "dataset stroke with < 2 points");
            seq.strokes.push_back(std::move(s));
        }
        if (seq.strokes.empty())
            throw Error(ErrorCategory::Io, "dataset record without strokes");
        out.push_back(std::move(seq));
    }
    return out;
}

}  // namespace vecsketch::sketch
