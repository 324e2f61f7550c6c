#include "vecsketch/encoded.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::sketch {

EncodedSketch augment_control_points(const EncodedSketch& sketch, double scale,
                                     Rng& rng) {
    EncodedSketch out = sketch;
    if (scale == 0.0) return out;
    for (EncodedStroke& s : out.strokes) {
        Vec2 first_shift{rng.normal() * scale, rng.normal() * scale};
        s.offset += first_shift;
        for (std::size_t i = 1; i < s.poly.points.size(); ++i) {
            Vec2 shift{rng.normal() * scale, rng.normal() * scale};
            s.poly.points[i] += shift - first_shift;
        }
    }
    return out;
}

std::vector<svg::PlacedCurve> to_placed_curves(const EncodedSketch& sketch) {
    std::vector<svg::PlacedCurve> out;
    out.reserve(sketch.strokes.size());
    for (const EncodedStroke& s : sketch.strokes)
        out.push_back(svg::PlacedCurve{s.poly, s.offset});
    return out;
}

void write_encoded_dataset(std::ostream& out, const std::vector<EncodedSketch>& data) {
    for (const EncodedSketch& sk : data) {
        nlohmann::json rec;
        rec["version"] = 1;
        rec["category"] = sk.category;
        rec["strokes"] = nlohmann::json::array();
        for (const EncodedStroke& s : sk.strokes) {
            nlohmann::json sj;
            sj["degree"] = s.poly.degree;
            sj["offset"] = {s.offset.x, s.offset.y};
            nlohmann::json pts = nlohmann::json::array();
            for (const Vec2& p : s.poly.points) pts.push_back({p.x, p.y});
            sj["points"] = std::move(pts);
            sj["loss"] = s.loss;
            rec["strokes"].push_back(std::move(sj));
        }
        out << rec.dump() << "\n";
    }
}

std::vector<EncodedSketch> read_encoded_dataset(std::istream& in) {
    std::vector<EncodedSketch> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCategory::Io, "encoded dataset line " +
                                               std::to_string(line_no) + ": " + e.what());
        }
        if (rec.value("version", 0) != 1)
            throw Error(ErrorCategory::Io, "unsupported encoded dataset version");
        EncodedSketch sk;
        sk.category = rec.value("category", "");
        for (const auto& sj : rec.at("strokes")) {
            EncodedStroke s;
            s.offset = {sj.at("offset").at(0).get<double>(),
                        sj.at("offset").at(1).get<double>()};
            s.loss = sj.value("loss", 0.0);
            Polyline pts;
            for (const auto& p : sj.at("points"))
                pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            s.poly = bezier::ControlPolygon(sj.at("degree").get<int>(), std::move(pts));
            sk.strokes.push_back(std::move(s));
        }
        if (sk.strokes.empty())
            throw Error(ErrorCategory::Io, "encoded record without strokes");
        out.push_back(std::move(sk));
    }
    return out;
}

}  // namespace vecsketch::sketch
