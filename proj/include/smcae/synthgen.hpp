#pragma once

// Synthetic character generation: class prototypes by joint alignment,
// boundary control points, control-point migration through interpolated
// signed distance fields, polygon rasterization and Gaussian shape sampling.

#include "smcae/common.hpp"
#include "smcae/hog.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace smcae {

using ByteMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BinaryImage {
    ByteMatrix pixels;  // height x width, entries 0 or 1

    BinaryImage() = default;
    BinaryImage(int width, int height);
    explicit BinaryImage(ByteMatrix p);

    int width() const { return static_cast<int>(pixels.cols()); }
    int height() const { return static_cast<int>(pixels.rows()); }
    std::uint8_t operator()(int row, int col) const { return pixels(row, col); }
    std::uint8_t& operator()(int row, int col) { return pixels(row, col); }
    Eigen::Index count() const;
    bool operator==(const BinaryImage& o) const { return pixels == o.pixels; }

    /// Throws DomainError on entries other than 0 and 1.
    void validate() const;
};

GrayImage to_gray(const BinaryImage& img);

/// Intersection over union of the foregrounds; 1 when both are empty.
double iou(const BinaryImage& a, const BinaryImage& b);

/// Foreground pixels with at least one 4-neighbour background pixel inside the image.
std::vector<std::pair<int, int>> boundary_pixels(const BinaryImage& img);

/// Signed exact Euclidean distance to the nearest boundary pixel: negative
/// inside the foreground, zero on the boundary, positive outside. Throws
/// DomainError when the image is entirely foreground or entirely background.
Matrix distance_transform(const BinaryImage& img);

enum class BinarizeMode {
    signed_interior,  // 1 where value <= 0
    intensity,        // 1 where value >= threshold
};

BinaryImage binarize(const Matrix& values, BinarizeMode mode, double threshold = 0.5);

struct Point {
    double x = 0.0;  // column
    double y = 0.0;  // row
    bool operator==(const Point&) const = default;
};

struct ShapeModel {
    std::vector<Point> points;
    std::vector<std::pair<int, int>> edges;  // closed cycles over point indices
    int width = 0;
    int height = 0;
    bool converged = false;

    /// Throws ShapeError unless every index is valid and every point has
    /// exactly two incident edges.
    void validate() const;
};

/// Boundary contours of every foreground component and hole, traced with
/// 8-connectivity, sampled at equal arc-length spacing. Points are split
/// between contours in proportion to their length; contours that would get
/// fewer than three points are dropped.
ShapeModel extract_control_points(const BinaryImage& img, int count = 32);

/// Even-odd scanline fill sampled at pixel centers, plus every pixel whose
/// center lies strictly closer than half a pixel to an edge. The square
/// (0,0)-(10,0)-(10,10)-(0,10) fills 11 x 11 pixels.
BinaryImage rasterize(const ShapeModel& shape, int width, int height);
BinaryImage rasterize(const ShapeModel& shape);

/// Moves each point to the nearest boundary pixel of img; ties go to the
/// smallest (row, column).
void snap_to_boundary(ShapeModel& shape, const BinaryImage& img);

/// Migrates control points from the synthetic image toward the real one
/// through `steps` intermediate shapes. The final step snaps onto the real
/// image's boundary.
ShapeModel optimize_control_points(const BinaryImage& real, const BinaryImage& synthetic,
                                   ShapeModel shape, int steps = 5);

struct MatchOptions {
    int steps = 5;
    int max_iterations = 20;
    double tolerance = 0.5;  // largest point displacement, pixels

    void validate() const;
};

struct MatchResult {
    BinaryImage image;
    ShapeModel shape;
    double iou = 0.0;  // against the real image
    int iterations = 0;
    bool converged = false;  // false means the iteration cap was hit
};

/// Repeats migration and re-rasterization until the points settle. Returns
/// the iterate (the starting shape included) whose raster best overlaps the
/// real image.
MatchResult match_synthetic(const BinaryImage& real, const ShapeModel& start, const BinaryImage& start_image,
                            const MatchOptions& opts = {});

struct Alignment {
    double tx = 0.0;
    double ty = 0.0;
    double rotation = 0.0;  // radians
    double scale = 1.0;
};

/// Similarity transform about the image center, bilinear, zero outside.
GrayImage warp(const GrayImage& img, const Alignment& a);

struct PrototypeOptions {
    int max_sweeps = 8;
    double translation_step = 1.0;
    double rotation_step = 0.08;
    double scale_step = 0.05;
};

struct PrototypeResult {
    GrayImage prototype;
    std::vector<Alignment> alignments;
    std::vector<GrayImage> aligned;
};

/// Joint alignment by coordinate search: each image's transform is nudged
/// to reduce its squared distance to the mean of the others, with step
/// halving once a sweep makes no progress. The prototype is the aligned mean.
PrototypeResult build_prototype(const std::vector<GrayImage>& images, const PrototypeOptions& opts = {});

struct ShapeDistribution {
    Vector mean;  // x0, y0, x1, y1, ...
    Matrix covariance;
    std::vector<std::pair<int, int>> edges;
    int width = 0;
    int height = 0;

    Eigen::Index point_count() const { return mean.size() / 2; }
};

/// Sample mean and (n-1) covariance of stacked coordinates, symmetrized,
/// plus ridge * I.
ShapeDistribution fit_mvn(const std::vector<ShapeModel>& shapes, double ridge = 1e-8);

/// Independent draws mean + L z with L the Cholesky factor of the
/// covariance. Coordinates are clamped to the image.
std::vector<ShapeModel> sample_shapes(const ShapeDistribution& d, int count, std::uint64_t seed);

/// Text format:
///   shape <points> <width> <height> <converged>
///   <x> <y>            one line per point
///   edges <count>
///   <i> <j>            one line per edge
void write_shape(std::ostream& out, const ShapeModel& shape);
ShapeModel read_shape(std::istream& in);
void save_shape(const ShapeModel& shape, const std::string& path);
ShapeModel load_shape(const std::string& path);

}  // namespace smcae
