#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "vecsketch/encoded.hpp"
#include "vecsketch/sketch.hpp"

namespace vecsketch::metrics {

enum class FeatureType { DownsampledRaster, GradientHistogram };

struct FeatureSpec {
    int raster_size = 64;
    FeatureType type = FeatureType::DownsampledRaster;
    int pool = 4;       // pooling factor for DownsampledRaster (64 -> 16x16)
    int grid_cells = 4;  // spatial cells per side for GradientHistogram
    int orientation_bins = 8;

    int dim() const {
        if (type == FeatureType::DownsampledRaster) {
            int side = raster_size / pool;
            return side * side;
        }
        return grid_cells * grid_cells * orientation_bins;
    }
};

/// Grayscale intensity grid in [0,1], row-major, size x size.
struct Raster {
    int size = 0;
    std::vector<double> pixels;

    double at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * size + col];
    }
};

/// Anti-aliased 1-px polyline rendering, bounding-box-fit with a 5% margin.
/// Throws on an empty sketch.
Raster rasterize(const std::vector<Polyline>& strokes, int size);
Raster rasterize(const sketch::StrokeSequence& sequence, int size);
Raster rasterize(const sketch::EncodedSketch& sketch, int size, int resolution = 64);

std::vector<double> extract_features(const Raster& raster, const FeatureSpec& spec);

struct PopulationStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // PSD-clamped unbiased estimate
    std::size_t count = 0;
    bool undersampled = false;  // fewer samples than feature dimensions
};

PopulationStats population_stats(const std::vector<std::vector<double>>& features);

/// Principal square root of a symmetric PSD matrix (eigenvalues clamped at
/// -1e-8; more negative is an error).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym);

/// Symmetrized square root used inside FID: sqrt(B^1/2 A B^1/2). Its trace
/// equals Tr((AB)^1/2) and its square has the trace of A*B.
Eigen::MatrixXd sqrt_product_psd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// ||mu_r - mu_g||^2 + Tr(Sigma_r + Sigma_g - 2 (Sigma_r Sigma_g)^1/2).
double fid(const PopulationStats& real, const PopulationStats& generated);

struct BucketResult {
    double fid = 0.0;
    std::size_t bucket_size = 0;
    bool low_sample_warning = false;  // fewer than 50 bucket members
};

/// FID between real sketches whose raw point count lies in
/// [center - halfwidth, center + halfwidth] and an equal number of samples
/// drawn from `sample` (called with the bucket index and an RNG).
BucketResult fid_by_length(
    const std::vector<sketch::StrokeSequence>& real,
    const std::function<sketch::EncodedSketch(std::size_t, Rng&)>& sample,
    int center, int halfwidth, std::size_t max_count, const FeatureSpec& spec,
    Rng& rng);

struct LengthHistogram {
    double bin_width = 0.0;
    std::vector<std::size_t> stroke_counts;  // per-stroke lengths
    std::vector<std::size_t> sketch_counts;  // per-sketch total lengths
    double stroke_mean = 0.0;
    double sketch_mean = 0.0;
    std::size_t strokes = 0;
    std::size_t sketches = 0;
};

LengthHistogram length_histogram(const std::vector<sketch::StrokeSequence>& data,
                                 double bin_width, std::size_t bins);
/// Encoded variant: a stroke's length is its control-point count (n+1); a
/// sketch's length is the control-point-mode sequence length sum (n_j + 1).
LengthHistogram length_histogram(const std::vector<sketch::EncodedSketch>& data,
                                 double bin_width, std::size_t bins);

}  // namespace vecsketch::metrics
