#include "smcae/hog.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace smcae {

GrayImage::GrayImage(int width, int height, double fill) {
    if (width < 0 || height < 0) throw ShapeError("image dimensions must be non-negative");
    pixels = Matrix::Constant(height, width, fill);
}

GrayImage::GrayImage(Matrix p) : pixels(std::move(p)) {}

void GrayImage::validate() const {
    for (Eigen::Index i = 0; i < pixels.size(); ++i) {
        const double v = pixels.data()[i];
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("image pixel outside [0,1]: " + std::to_string(v));
    }
}

GrayImage resize(const GrayImage& img, int width, int height) {
    if (width < 1 || height < 1) {
        throw ShapeError("resize target must be at least 1x1, got " + std::to_string(width) + "x" +
                         std::to_string(height));
    }
    if (img.width() < 1 || img.height() < 1) throw ShapeError("cannot resize an empty image");
    if (width == img.width() && height == img.height()) return img;

    struct Tap {
        int lo, hi;
        double t;
    };
    auto taps = [](int src, int dst) {
        std::vector<Tap> out(static_cast<std::size_t>(dst));
        const double scale = static_cast<double>(src) / dst;
        for (int i = 0; i < dst; ++i) {
            const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
            const int lo = static_cast<int>(std::floor(pos));
            const int hi = std::min(lo + 1, src - 1);
            out[static_cast<std::size_t>(i)] = {lo, hi, pos - lo};
        }
        return out;
    };
    const auto rows = taps(img.height(), height);
    const auto cols = taps(img.width(), width);

    GrayImage out(width, height);
    for (int r = 0; r < height; ++r) {
        const auto& ry = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < width; ++c) {
            const auto& cx = cols[static_cast<std::size_t>(c)];
            const double top = (1 - cx.t) * img(ry.lo, cx.lo) + cx.t * img(ry.lo, cx.hi);
            const double bottom = (1 - cx.t) * img(ry.hi, cx.lo) + cx.t * img(ry.hi, cx.hi);
            out(r, c) = std::clamp((1 - ry.t) * top + ry.t * bottom, 0.0, 1.0);
        }
    }
    return out;
}

void HogConfig::validate() const {
    if (cell_size < 1) throw DomainError("HOG cell_size must be at least 1");
    if (orientation_bins < 2) throw DomainError("HOG orientation_bins must be at least 2");
    if (block_size < 1) throw DomainError("HOG block_size must be at least 1");
    if (block_stride < 1) throw DomainError("HOG block_stride must be at least 1");
}

namespace {

struct Grid {
    int cells_x, cells_y, blocks_x, blocks_y;
};

Grid grid_for(int width, int height, const HogConfig& cfg) {
    cfg.validate();
    Grid g{width / cfg.cell_size, height / cfg.cell_size, 0, 0};
    if (g.cells_x < 1 || g.cells_y < 1) {
        throw ShapeError("image " + std::to_string(width) + "x" + std::to_string(height) +
                         " is smaller than one HOG cell of " + std::to_string(cfg.cell_size) + " pixels");
    }
    if (g.cells_x < cfg.block_size || g.cells_y < cfg.block_size) {
        throw ShapeError("image " + std::to_string(width) + "x" + std::to_string(height) +
                         " has fewer cells than one HOG block");
    }
    g.blocks_x = (g.cells_x - cfg.block_size) / cfg.block_stride + 1;
    g.blocks_y = (g.cells_y - cfg.block_size) / cfg.block_stride + 1;
    return g;
}

void l2_hys(double* v, Eigen::Index n) {
    constexpr double eps2 = 1e-10;
    constexpr double clip = 0.2;
    Eigen::Map<Vector> x(v, n);
    x /= std::sqrt(x.squaredNorm() + eps2);
    x = x.cwiseMin(clip);
    x /= std::sqrt(x.squaredNorm() + eps2);
}

}  // namespace

Eigen::Index hog_length(int width, int height, const HogConfig& cfg) {
    const Grid g = grid_for(width, height, cfg);
    return static_cast<Eigen::Index>(g.blocks_x) * g.blocks_y * cfg.block_size * cfg.block_size *
           cfg.orientation_bins;
}

Vector hog(const GrayImage& img, const HogConfig& cfg) {
    const Grid g = grid_for(img.width(), img.height(), cfg);
    const int bins = cfg.orientation_bins;
    const double range = cfg.signed_orientation ? 360.0 : 180.0;
    const double bin_width = range / bins;
    const int w = img.width();
    const int h = img.height();

    // hist(cell_y, cell_x, bin) stored flat.
    std::vector<double> hist(static_cast<std::size_t>(g.cells_x) * g.cells_y * bins, 0.0);
    const int used_h = g.cells_y * cfg.cell_size;
    const int used_w = g.cells_x * cfg.cell_size;
    for (int r = 0; r < used_h; ++r) {
        for (int c = 0; c < used_w; ++c) {
            const double gx = img(r, std::min(c + 1, w - 1)) - img(r, std::max(c - 1, 0));
            const double gy = img(std::min(r + 1, h - 1), c) - img(std::max(r - 1, 0), c);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
            if (angle < 0) angle += 360.0;
            if (!cfg.signed_orientation && angle >= 180.0) angle -= 180.0;
            // Bin b is centered at b * bin_width; interpolate between the two nearest centers.
            const double pos = angle / bin_width;
            int lo = static_cast<int>(std::floor(pos));
            const double t = pos - lo;
            lo %= bins;
            const int hi = (lo + 1) % bins;
            double* cell = &hist[(static_cast<std::size_t>(r / cfg.cell_size) * g.cells_x + c / cfg.cell_size) * bins];
            cell[lo] += mag * (1.0 - t);
            cell[hi] += mag * t;
        }
    }

    const Eigen::Index block_len = static_cast<Eigen::Index>(cfg.block_size) * cfg.block_size * bins;
    Vector out(static_cast<Eigen::Index>(g.blocks_x) * g.blocks_y * block_len);
    Eigen::Index k = 0;
    for (int by = 0; by < g.blocks_y; ++by) {
        for (int bx = 0; bx < g.blocks_x; ++bx) {
            const Eigen::Index start = k;
            for (int cy = 0; cy < cfg.block_size; ++cy) {
                for (int cx = 0; cx < cfg.block_size; ++cx) {
                    const int y = by * cfg.block_stride + cy;
                    const int x = bx * cfg.block_stride + cx;
                    const double* cell = &hist[(static_cast<std::size_t>(y) * g.cells_x + x) * bins];
                    for (int b = 0; b < bins; ++b) out[k++] = cell[b];
                }
            }
            l2_hys(out.data() + start, block_len);
        }
    }
    return out;
}

FeatureMatrix hog_features(const std::vector<GrayImage>& images, const HogConfig& cfg) {
    if (images.empty()) return FeatureMatrix(0, 0);
    const Eigen::Index len = hog_length(images.front().width(), images.front().height(), cfg);
    FeatureMatrix out(static_cast<Eigen::Index>(images.size()), len);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const Vector d = hog(images[i], cfg);
        if (d.size() != len) {
            throw ShapeError("image " + std::to_string(i) + " yields a descriptor of length " +
                             std::to_string(d.size()) + ", expected " + std::to_string(len));
        }
        out.row(static_cast<Eigen::Index>(i)) = d.transpose();
    }
    return out;
}

}  // namespace smcae
