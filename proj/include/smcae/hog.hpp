#pragma once

// Grayscale images, bilinear resizing and histogram-of-oriented-gradients
// descriptors.

#include "smcae/common.hpp"

#include <vector>

namespace smcae {

struct GrayImage {
    Matrix pixels;  // height x width, values in [0,1]

    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0);
    explicit GrayImage(Matrix p);

    int width() const { return static_cast<int>(pixels.cols()); }
    int height() const { return static_cast<int>(pixels.rows()); }
    double operator()(int row, int col) const { return pixels(row, col); }
    double& operator()(int row, int col) { return pixels(row, col); }

    /// Throws DomainError if any pixel is outside [0,1] or not finite.
    void validate() const;
};

/// Bilinear resampling with pixel centers aligned and edges clamped.
GrayImage resize(const GrayImage& img, int width, int height);

struct HogConfig {
    int cell_size = 3;
    int orientation_bins = 9;
    int block_size = 2;    // cells per block side
    int block_stride = 1;  // in cells
    bool signed_orientation = false;

    void validate() const;
};

/// Descriptor length for an image of the given size. Pixels beyond the last
/// full cell are dropped.
Eigen::Index hog_length(int width, int height, const HogConfig& cfg);

/// Centered [-1,0,1] gradients, per-cell orientation histograms with linear
/// bin interpolation, L2-hys block normalization, row-major block order.
Vector hog(const GrayImage& img, const HogConfig& cfg = {});

/// One descriptor per row.
FeatureMatrix hog_features(const std::vector<GrayImage>& images, const HogConfig& cfg = {});

}  // namespace smcae
