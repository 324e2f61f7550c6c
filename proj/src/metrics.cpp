#include "vecsketch/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "vecsketch/bezier.hpp"
#include "vecsketch/error.hpp"

namespace vecsketch::metrics {

namespace {

void plot(Raster& r, int x, int y, double intensity) {
    if (x < 0 || y < 0 || x >= r.size || y >= r.size) return;
    double& p = r.pixels[static_cast<std::size_t>(y) * r.size + x];
    p = std::min(1.0, p + intensity);
}

// Xiaolin Wu's anti-aliased line.
void draw_line(Raster& r, Vec2 a, Vec2 b) {
    auto ipart = [](double v) { return std::floor(v); };
    auto fpart = [](double v) { return v - std::floor(v); };
    bool steep = std::fabs(b.y - a.y) > std::fabs(b.x - a.x);
    if (steep) {
        std::swap(a.x, a.y);
        std::swap(b.x, b.y);
    }
    if (a.x > b.x) std::swap(a, b);
    double dx = b.x - a.x;
    double gradient = dx == 0.0 ? 1.0 : (b.y - a.y) / dx;

    auto endpoint = [&](const Vec2& p, double& inter) {
        double xend = std::round(p.x);
        double yend = p.y + gradient * (xend - p.x);
        double xgap = 1.0 - fpart(p.x + 0.5);
        int px = static_cast<int>(xend);
        int py = static_cast<int>(ipart(yend));
        if (steep) {
            plot(r, py, px, (1.0 - fpart(yend)) * xgap);
            plot(r, py + 1, px, fpart(yend) * xgap);
        } else {
            plot(r, px, py, (1.0 - fpart(yend)) * xgap);
            plot(r, px, py + 1, fpart(yend) * xgap);
        }
        inter = yend + gradient;
        return px;
    };

    double intery = 0.0;
    int xstart = endpoint(a, intery);
    double tmp;
    int xend = endpoint(b, tmp);
    for (int x = xstart + 1; x < xend; ++x) {
        int y = static_cast<int>(ipart(intery));
        if (steep) {
            plot(r, y, x, 1.0 - fpart(intery));
            plot(r, y + 1, x, fpart(intery));
        } else {
            plot(r, x, y, 1.0 - fpart(intery));
            plot(r, x, y + 1, fpart(intery));
        }
        intery += gradient;
    }
}

}  // namespace

Raster rasterize(const std::vector<Polyline>& strokes, int size) {
    if (size < 4) throw Error(ErrorCategory::Config, "raster size too small");
    Polyline all;
    for (const Polyline& s : strokes) all.insert(all.end(), s.begin(), s.end());
    if (all.empty()) throw Error(ErrorCategory::Config, "cannot rasterize an empty sketch");
    for (const Vec2& p : all)
        if (!p.finite())
            throw Error(ErrorCategory::Numeric, "non-finite coordinate in sketch");

    Bounds b = Bounds::of(all);
    const double margin = 0.05 * size;
    const double extent = std::max({b.width(), b.height(), 1e-12});
    const double scale = (size - 2.0 * margin) / extent;
    const Vec2 center{(b.lo.x + b.hi.x) / 2.0, (b.lo.y + b.hi.y) / 2.0};
    const double half = size / 2.0;
    auto map = [&](const Vec2& p) -> Vec2 {
        return {(p.x - center.x) * scale + half, (p.y - center.y) * scale + half};
    };

    Raster raster;
    raster.size = size;
    raster.pixels.assign(static_cast<std::size_t>(size) * size, 0.0);
    for (const Polyline& s : strokes) {
        if (s.empty()) continue;
        if (s.size() == 1 || extent <= 1e-12) {
            Vec2 q = map(s.front());
            plot(raster, static_cast<int>(q.x), static_cast<int>(q.y), 1.0);
            continue;
        }
        for (std::size_t i = 1; i < s.size(); ++i)
            draw_line(raster, map(s[i - 1]), map(s[i]));
    }
    return raster;
}

Raster rasterize(const sketch::StrokeSequence& sequence, int size) {
    std::vector<Polyline> strokes;
    for (const sketch::Stroke& s : sequence.strokes) {
        Polyline pts;
        pts.reserve(s.points.size());
        for (const Vec2& p : s.points) pts.push_back(p + s.offset);
        strokes.push_back(std::move(pts));
    }
    return rasterize(strokes, size);
}

Raster rasterize(const sketch::EncodedSketch& sk, int size, int resolution) {
    std::vector<Polyline> strokes;
    for (const sketch::EncodedStroke& s : sk.strokes) {
        Polyline pts = bezier::decode_stroke(s.poly, resolution);
        for (Vec2& p : pts) p += s.offset;
        strokes.push_back(std::move(pts));
    }
    return rasterize(strokes, size);
}

std::vector<double> extract_features(const Raster& raster, const FeatureSpec& spec) {
    if (raster.size != spec.raster_size)
        throw Error(ErrorCategory::Config, "raster size does not match feature spec");
    if (spec.type == FeatureType::DownsampledRaster) {
        const int side = spec.raster_size / spec.pool;
        std::vector<double> out(static_cast<std::size_t>(side) * side, 0.0);
        const double inv = 1.0 / (spec.pool * spec.pool);
        for (int y = 0; y < raster.size; ++y)
            for (int x = 0; x < raster.size; ++x)
                out[static_cast<std::size_t>(y / spec.pool) * side + x / spec.pool] +=
                    raster.at(y, x) * inv;
        return out;
    }

    // Coarse gradient-orientation histogram (unsigned orientations).
    const int cells = spec.grid_cells;
    const int bins = spec.orientation_bins;
    std::vector<double> out(static_cast<std::size_t>(cells) * cells * bins, 0.0);
    const int cell_px = raster.size / cells;
    double total = 0.0;
    for (int y = 1; y + 1 < raster.size; ++y)
        for (int x = 1; x + 1 < raster.size; ++x) {
            double gx = raster.at(y, x + 1) - raster.at(y, x - 1);
            double gy = raster.at(y + 1, x) - raster.at(y - 1, x);
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag <= 1e-12) continue;
            double angle = std::atan2(gy, gx);
            if (angle < 0) angle += M_PI;  // unsigned
            int bin = std::min(bins - 1, static_cast<int>(angle / M_PI * bins));
            int cx = std::min(cells - 1, x / cell_px);
            int cy = std::min(cells - 1, y / cell_px);
            out[(static_cast<std::size_t>(cy) * cells + cx) * bins + bin] += mag;
            total += mag;
        }
    if (total > 0.0)
        for (double& v : out) v /= total;
    return out;
}

PopulationStats population_stats(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2)
        throw Error(ErrorCategory::Config, "population stats need at least 2 samples");
    const auto n = static_cast<Eigen::Index>(features.size());
    const auto d = static_cast<Eigen::Index>(features.front().size());
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(features[i].size()) != d)
            throw Error(ErrorCategory::Config, "inconsistent feature dimensions");
        for (Eigen::Index j = 0; j < d; ++j) X(i, j) = features[i][j];
    }
    PopulationStats stats;
    stats.count = features.size();
    stats.undersampled = n < d;
    stats.mean = X.colwise().mean();
    Eigen::MatrixXd centered = X.rowwise() - stats.mean.transpose();
    stats.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    // Finite-sample covariances can pick up tiny negative eigenvalues.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.cov);
    Eigen::VectorXd vals = eig.eigenvalues();
    bool clamped = false;
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -1e-8)
            throw Error(ErrorCategory::Numeric,
                        "covariance eigenvalue below the PSD clamp threshold");
        if (vals[i] < 0.0) {
            vals[i] = 0.0;
            clamped = true;
        }
    }
    if (clamped)
        stats.cov = eig.eigenvectors() * vals.asDiagonal() *
                    eig.eigenvectors().transpose();
    return stats;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym) {
    if (!sym.allFinite())
        throw Error(ErrorCategory::Numeric, "non-finite matrix entries");
    Eigen::MatrixXd s = 0.5 * (sym + sym.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    Eigen::VectorXd vals = eig.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (vals[i] < -1e-8)
            throw Error(ErrorCategory::Numeric,
                        "matrix is not PSD within the clamp threshold");
        vals[i] = std::sqrt(std::max(0.0, vals[i]));
    }
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd sqrt_product_psd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(ErrorCategory::Config, "matrix dimension mismatch");
    Eigen::MatrixXd sb = psd_sqrt(b);
    return psd_sqrt(sb * a * sb);
}

double fid(const PopulationStats& real, const PopulationStats& generated) {
    if (real.mean.size() != generated.mean.size())
        throw Error(ErrorCategory::Config, "feature dimension mismatch");
    double mean_term = (real.mean - generated.mean).squaredNorm();
    Eigen::MatrixXd root = sqrt_product_psd(real.cov, generated.cov);
    double value = mean_term + real.cov.trace() + generated.cov.trace() -
                   2.0 * root.trace();
    return std::max(0.0, value);
}

BucketResult fid_by_length(
    const std::vector<sketch::StrokeSequence>& real,
    const std::function<sketch::EncodedSketch(std::size_t, Rng&)>& sample,
    int center, int halfwidth, std::size_t max_count, const FeatureSpec& spec,
    Rng& rng) {
    std::vector<std::size_t> bucket;
    for (std::size_t i = 0; i < real.size(); ++i) {
        std::size_t len = 0;
        for (const sketch::Stroke& s : real[i].strokes) len += s.size();
        if (len + halfwidth >= static_cast<std::size_t>(center) &&
            len <= static_cast<std::size_t>(center + halfwidth))
            bucket.push_back(i);
    }
    if (bucket.empty())
        throw Error(ErrorCategory::Config,
                    "no sketches with length near " + std::to_string(center));
    if (bucket.size() > max_count) {
        rng.shuffle(bucket);
        bucket.resize(max_count);
    }

    BucketResult result;
    result.bucket_size = bucket.size();
    result.low_sample_warning = bucket.size() < 50;

    std::vector<std::vector<double>> real_features, gen_features;
    for (std::size_t i : bucket)
        real_features.push_back(
            extract_features(rasterize(real[i], spec.raster_size), spec));
    for (std::size_t k = 0; k < bucket.size(); ++k) {
        sketch::EncodedSketch sampled = sample(bucket[k], rng);
        gen_features.push_back(
            extract_features(rasterize(sampled, spec.raster_size), spec));
    }
    result.fid = fid(population_stats(real_features), population_stats(gen_features));
    return result;
}

namespace {

LengthHistogram build_histogram(const std::vector<std::vector<std::size_t>>& lengths,
                                double bin_width, std::size_t bins) {
    LengthHistogram h;
    h.bin_width = bin_width;
    h.stroke_counts.assign(bins, 0);
    h.sketch_counts.assign(bins, 0);
    for (const auto& sketch_lengths : lengths) {
        std::size_t total = 0;
        for (std::size_t len : sketch_lengths) {
            total += len;
            std::size_t bin = std::min(bins - 1,
                                       static_cast<std::size_t>(len / bin_width));
            ++h.stroke_counts[bin];
            h.stroke_mean += static_cast<double>(len);
            ++h.strokes;
        }
        std::size_t bin =
            std::min(bins - 1, static_cast<std::size_t>(total / bin_width));
        ++h.sketch_counts[bin];
        h.sketch_mean += static_cast<double>(total);
        ++h.sketches;
    }
    if (h.strokes) h.stroke_mean /= static_cast<double>(h.strokes);
    if (h.sketches) h.sketch_mean /= static_cast<double>(h.sketches);
    return h;
}

}  // namespace

LengthHistogram length_histogram(const std::vector<sketch::StrokeSequence>& data,
                                 double bin_width, std::size_t bins) {
    if (data.empty()) throw Error(ErrorCategory::Config, "empty dataset");
    std::vector<std::vector<std::size_t>> lengths;
    for (const auto& seq : data) {
        std::vector<std::size_t> ls;
        for (const auto& s : seq.strokes) ls.push_back(s.size());
        lengths.push_back(std::move(ls));
    }
    return build_histogram(lengths, bin_width, bins);
}

LengthHistogram length_histogram(const std::vector<sketch::EncodedSketch>& data,
                                 double bin_width, std::size_t bins) {
    if (data.empty()) throw Error(ErrorCategory::Config, "empty dataset");
    std::vector<std::vector<std::size_t>> lengths;
    for (const auto& sk : data) {
        std::vector<std::size_t> ls;
        for (const auto& s : sk.strokes) ls.push_back(s.poly.points.size());
        lengths.push_back(std::move(ls));
    }
    return build_histogram(lengths, bin_width, bins);
}

}  // namespace vecsketch::metrics
