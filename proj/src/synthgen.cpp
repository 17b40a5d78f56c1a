#include "smcae/synthgen.hpp"

#include "smcae/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace smcae {

BinaryImage::BinaryImage(int width, int height) {
    if (width < 0 || height < 0) throw ShapeError("image dimensions must be non-negative");
    pixels = ByteMatrix::Zero(height, width);
}

BinaryImage::BinaryImage(ByteMatrix p) : pixels(std::move(p)) {}

Eigen::Index BinaryImage::count() const {
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i < pixels.size(); ++i) n += pixels.data()[i] != 0;
    return n;
}

void BinaryImage::validate() const {
    for (Eigen::Index i = 0; i < pixels.size(); ++i) {
        if (pixels.data()[i] > 1) throw DomainError("binary image holds a value other than 0 or 1");
    }
}

GrayImage to_gray(const BinaryImage& img) { return GrayImage(img.pixels.cast<double>()); }

namespace {

void require_same_size(const BinaryImage& a, const BinaryImage& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                         std::to_string(b.height()) + ")");
    }
}

}  // namespace

double iou(const BinaryImage& a, const BinaryImage& b) {
    require_same_size(a, b, "iou");
    Eigen::Index inter = 0;
    Eigen::Index uni = 0;
    for (Eigen::Index i = 0; i < a.pixels.size(); ++i) {
        const bool x = a.pixels.data()[i] != 0;
        const bool y = b.pixels.data()[i] != 0;
        inter += x && y;
        uni += x || y;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::pair<int, int>> boundary_pixels(const BinaryImage& img) {
    std::vector<std::pair<int, int>> out;
    const int h = img.height();
    const int w = img.width();
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!img(r, c)) continue;
            const bool edge = (r > 0 && !img(r - 1, c)) || (r + 1 < h && !img(r + 1, c)) ||
                              (c > 0 && !img(r, c - 1)) || (c + 1 < w && !img(r, c + 1));
            if (edge) out.emplace_back(r, c);
        }
    }
    return out;
}

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas: d[q] = min_p (q - p)^2 + f[p].
void squared_distance_1d(const double* f, int n, std::ptrdiff_t stride_f, double* d, std::ptrdiff_t stride_d,
                         std::vector<int>& v, std::vector<double>& z) {
    v.assign(static_cast<std::size_t>(n), 0);
    z.assign(static_cast<std::size_t>(n) + 1, 0.0);
    auto F = [&](int q) { return f[q * stride_f]; };
    int k = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s = 0.0;
        while (true) {
            const int p = v[static_cast<std::size_t>(k)];
            s = ((F(q) + static_cast<double>(q) * q) - (F(p) + static_cast<double>(p) * p)) / (2.0 * (q - p));
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[static_cast<std::size_t>(k)] = q;
        z[static_cast<std::size_t>(k)] = s;
        z[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
        const int p = v[static_cast<std::size_t>(k)];
        d[q * stride_d] = static_cast<double>(q - p) * (q - p) + F(p);
    }
}

}  // namespace

Matrix distance_transform(const BinaryImage& img) {
    const int h = img.height();
    const int w = img.width();
    const Eigen::Index fg = img.count();
    if (fg == 0) throw DomainError("distance transform of an image without foreground is undefined");
    if (fg == img.pixels.size()) throw DomainError("distance transform of an all-foreground image is undefined");

    Matrix f = Matrix::Constant(h, w, kFar);
    for (const auto& [r, c] : boundary_pixels(img)) f(r, c) = 0.0;

    Matrix tmp(h, w);
    std::vector<int> v;
    std::vector<double> z;
    for (int c = 0; c < w; ++c) squared_distance_1d(f.data() + c, h, w, tmp.data() + c, w, v, z);
    Matrix d(h, w);
    for (int r = 0; r < h; ++r) squared_distance_1d(tmp.data() + r * w, w, 1, d.data() + r * w, 1, v, z);

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double dist = std::sqrt(d(r, c));
            d(r, c) = img(r, c) ? -dist : dist;
        }
    }
    return d;
}

BinaryImage binarize(const Matrix& values, BinarizeMode mode, double threshold) {
    BinaryImage out(static_cast<int>(values.cols()), static_cast<int>(values.rows()));
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = values.data()[i];
        out.pixels.data()[i] = mode == BinarizeMode::signed_interior ? (v <= 0.0) : (v >= threshold);
    }
    return out;
}

void ShapeModel::validate() const {
    const auto n = static_cast<int>(points.size());
    std::vector<int> degree(points.size(), 0);
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= n || b < 0 || b >= n || a == b) {
            throw ShapeError("shape edge (" + std::to_string(a) + ", " + std::to_string(b) +
                             ") is invalid for " + std::to_string(n) + " points");
        }
        ++degree[static_cast<std::size_t>(a)];
        ++degree[static_cast<std::size_t>(b)];
    }
    for (int i = 0; i < n; ++i) {
        if (degree[static_cast<std::size_t>(i)] != 2) {
            throw ShapeError("shape is not a set of closed cycles: point " + std::to_string(i) + " has " +
                             std::to_string(degree[static_cast<std::size_t>(i)]) + " edges");
        }
    }
}

namespace {

// Neighbour offsets in counterclockwise order (row axis points down), east first.
constexpr std::array<int, 8> kDr{0, -1, -1, -1, 0, 1, 1, 1};
constexpr std::array<int, 8> kDc{1, 1, 0, -1, -1, -1, 0, 1};

int direction(int dr, int dc) {
    for (int d = 0; d < 8; ++d) {
        if (kDr[static_cast<std::size_t>(d)] == dr && kDc[static_cast<std::size_t>(d)] == dc) return d;
    }
    throw std::logic_error("pixels are not neighbours");
}

struct Contour {
    std::vector<std::pair<int, int>> pixels;  // (row, col)
};

// Border following of Suzuki and Abe: outer borders of 8-connected
// components and the borders of their holes.
std::vector<Contour> trace_contours(const BinaryImage& img) {
    const int h = img.height() + 2;
    const int w = img.width() + 2;
    std::vector<int> f(static_cast<std::size_t>(h) * w, 0);
    auto at = [&](int r, int c) -> int& { return f[static_cast<std::size_t>(r) * w + c]; };
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) at(r + 1, c + 1) = img(r, c) ? 1 : 0;

    std::vector<Contour> out;
    int nbd = 1;
    for (int i = 1; i < h - 1; ++i) {
        for (int j = 1; j < w - 1; ++j) {
            int i2 = 0, j2 = 0;
            if (at(i, j) == 1 && at(i, j - 1) == 0) {
                i2 = i;
                j2 = j - 1;
            } else if (at(i, j) >= 1 && at(i, j + 1) == 0) {
                i2 = i;
                j2 = j + 1;
            } else {
                continue;
            }
            ++nbd;
            Contour contour;

            // Clockwise search for the first nonzero neighbour.
            const int d0 = direction(i2 - i, j2 - j);
            int i1 = -1, j1 = -1;
            for (int k = 0; k < 8; ++k) {
                const int d = ((d0 - k) % 8 + 8) % 8;
                const int r = i + kDr[static_cast<std::size_t>(d)];
                const int c = j + kDc[static_cast<std::size_t>(d)];
                if (at(r, c) != 0) {
                    i1 = r;
                    j1 = c;
                    break;
                }
            }
            if (i1 < 0) {
                at(i, j) = -nbd;
                contour.pixels.emplace_back(i - 1, j - 1);
                out.push_back(std::move(contour));
                continue;
            }
            i2 = i1;
            j2 = j1;
            int i3 = i, j3 = j;
            contour.pixels.emplace_back(i - 1, j - 1);
            while (true) {
                const int start = direction(i2 - i3, j2 - j3);
                bool east_zero = false;
                int i4 = -1, j4 = -1;
                for (int k = 1; k <= 8; ++k) {
                    const int d = (start + k) % 8;
                    const int r = i3 + kDr[static_cast<std::size_t>(d)];
                    const int c = j3 + kDc[static_cast<std::size_t>(d)];
                    if (at(r, c) != 0) {
                        i4 = r;
                        j4 = c;
                        break;
                    }
                    if (d == 0) east_zero = true;
                }
                if (east_zero) {
                    at(i3, j3) = -nbd;
                } else if (at(i3, j3) == 1) {
                    at(i3, j3) = nbd;
                }
                if (i4 == i && j4 == j && i3 == i1 && j3 == j1) break;
                i2 = i3;
                j2 = j3;
                i3 = i4;
                j3 = j4;
                contour.pixels.emplace_back(i3 - 1, j3 - 1);
            }
            out.push_back(std::move(contour));
        }
    }
    return out;
}

double closed_length(const std::vector<std::pair<int, int>>& px) {
    if (px.size() < 2) return 0.0;
    double len = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const auto& a = px[i];
        const auto& b = px[(i + 1) % px.size()];
        len += std::hypot(a.first - b.first, a.second - b.second);
    }
    return len;
}

// Largest-remainder split of `total` points in proportion to `lengths`;
// ties go to the earlier contour.
std::vector<int> allocate(const std::vector<double>& lengths, const std::vector<bool>& active, int total) {
    std::vector<int> out(lengths.size(), 0);
    double sum = 0.0;
    for (std::size_t i = 0; i < lengths.size(); ++i)
        if (active[i]) sum += lengths[i];
    if (sum <= 0.0) return out;
    std::vector<std::pair<double, std::size_t>> rem;
    int given = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (!active[i]) continue;
        const double share = total * lengths[i] / sum;
        out[i] = static_cast<int>(std::floor(share));
        given += out[i];
        rem.emplace_back(share - out[i], i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[rem[k % rem.size()].second];
    return out;
}

}  // namespace

ShapeModel extract_control_points(const BinaryImage& img, int count) {
    if (count < 3) throw DomainError("at least 3 control points are required, got " + std::to_string(count));
    if (img.count() == 0) throw DomainError("cannot extract control points from an empty image");
    const auto boundary = boundary_pixels(img);
    if (static_cast<std::size_t>(count) > boundary.size()) {
        throw DomainError("requested " + std::to_string(count) + " control points but the boundary has only " +
                          std::to_string(boundary.size()) + " pixels");
    }

    const auto contours = trace_contours(img);
    std::vector<double> lengths;
    for (const auto& c : contours) lengths.push_back(closed_length(c.pixels));
    std::vector<bool> active(contours.size());
    for (std::size_t i = 0; i < contours.size(); ++i) active[i] = lengths[i] > 0.0;

    std::vector<int> share;
    while (true) {
        share = allocate(lengths, active, count);
        bool dropped = false;
        for (std::size_t i = 0; i < contours.size(); ++i) {
            if (active[i] && share[i] < 3) {
                active[i] = false;
                dropped = true;
            }
        }
        if (!dropped) break;
    }
    if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) {
        throw DomainError("no boundary contour is long enough to hold control points");
    }

    ShapeModel shape;
    shape.width = img.width();
    shape.height = img.height();
    for (std::size_t ci = 0; ci < contours.size(); ++ci) {
        if (!active[ci]) continue;
        const auto& px = contours[ci].pixels;
        const int m = share[ci];
        const double spacing = lengths[ci] / m;
        const int first = static_cast<int>(shape.points.size());
        std::size_t seg = 0;
        double seg_start = 0.0;
        for (int k = 0; k < m; ++k) {
            const double target = k * spacing;
            auto seg_len = [&](std::size_t s) {
                const auto& a = px[s];
                const auto& b = px[(s + 1) % px.size()];
                return std::hypot(a.first - b.first, a.second - b.second);
            };
            while (seg + 1 < px.size() && seg_start + seg_len(seg) < target) {
                seg_start += seg_len(seg);
                ++seg;
            }
            const auto& a = px[seg];
            const auto& b = px[(seg + 1) % px.size()];
            const double len = seg_len(seg);
            const double t = len > 0.0 ? std::clamp((target - seg_start) / len, 0.0, 1.0) : 0.0;
            shape.points.push_back({a.second + t * (b.second - a.second), a.first + t * (b.first - a.first)});
        }
        for (int k = 0; k < m; ++k) shape.edges.emplace_back(first + k, first + (k + 1) % m);
    }
    return shape;
}

BinaryImage rasterize(const ShapeModel& shape, int width, int height) {
    shape.validate();
    BinaryImage out(width, height);
    constexpr double eps = 1e-9;
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        xs.clear();
        for (const auto& [ia, ib] : shape.edges) {
            const Point& a = shape.points[static_cast<std::size_t>(ia)];
            const Point& b = shape.points[static_cast<std::size_t>(ib)];
            if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) {
                xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int lo = std::max(0, static_cast<int>(std::ceil(xs[k] - eps)));
            const int hi = std::min(width - 1, static_cast<int>(std::floor(xs[k + 1] + eps)));
            for (int c = lo; c <= hi; ++c) out(y, c) = 1;
        }
    }
    // Pixel centers closer than half a pixel to the outline.
    for (const auto& [ia, ib] : shape.edges) {
        const Point& a = shape.points[static_cast<std::size_t>(ia)];
        const Point& b = shape.points[static_cast<std::size_t>(ib)];
        const double ex = b.x - a.x;
        const double ey = b.y - a.y;
        const double len2 = ex * ex + ey * ey;
        const int c0 = std::max(0, static_cast<int>(std::ceil(std::min(a.x, b.x) - 0.5)));
        const int c1 = std::min(width - 1, static_cast<int>(std::floor(std::max(a.x, b.x) + 0.5)));
        const int r0 = std::max(0, static_cast<int>(std::ceil(std::min(a.y, b.y) - 0.5)));
        const int r1 = std::min(height - 1, static_cast<int>(std::floor(std::max(a.y, b.y) + 0.5)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double t = len2 > 0.0 ? std::clamp(((c - a.x) * ex + (r - a.y) * ey) / len2, 0.0, 1.0) : 0.0;
                const double dx = a.x + t * ex - c;
                const double dy = a.y + t * ey - r;
                if (dx * dx + dy * dy < 0.25 - eps) out(r, c) = 1;
            }
        }
    }
    return out;
}

BinaryImage rasterize(const ShapeModel& shape) { return rasterize(shape, shape.width, shape.height); }

void snap_to_boundary(ShapeModel& shape, const BinaryImage& img) {
    const auto boundary = boundary_pixels(img);
    if (boundary.empty()) throw DomainError("cannot snap control points: image has no boundary");
    for (auto& p : shape.points) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> pick = boundary.front();
        for (const auto& b : boundary) {  // row-major order, so strict < keeps the smallest (row, col)
            const double dx = b.second - p.x;
            const double dy = b.first - p.y;
            const double d = dx * dx + dy * dy;
            if (d < best) {
                best = d;
                pick = b;
            }
        }
        p = {static_cast<double>(pick.second), static_cast<double>(pick.first)};
    }
}

ShapeModel optimize_control_points(const BinaryImage& real, const BinaryImage& synthetic, ShapeModel shape,
                                   int steps) {
    if (steps < 1) throw DomainError("migration needs at least one step");
    require_same_size(real, synthetic, "optimize_control_points");
    const Matrix to = distance_transform(real);
    const Matrix from = distance_transform(synthetic);
    for (int i = 1; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const BinaryImage mid = binarize((1.0 - t) * from + t * to, BinarizeMode::signed_interior);
        if (boundary_pixels(mid).empty()) {
            throw DomainError("intermediate shape at step " + std::to_string(i) + " of " + std::to_string(steps) +
                              " has no boundary");
        }
        snap_to_boundary(shape, mid);
    }
    shape.width = real.width();
    shape.height = real.height();
    shape.converged = true;
    return shape;
}

void MatchOptions::validate() const {
    if (steps < 1) throw DomainError("steps must be at least 1");
    if (max_iterations < 1) throw DomainError("max_iterations must be at least 1");
    if (!(tolerance > 0.0)) throw DomainError("tolerance must be positive");
}

MatchResult match_synthetic(const BinaryImage& real, const ShapeModel& start, const BinaryImage& start_image,
                            const MatchOptions& opts) {
    opts.validate();
    require_same_size(real, start_image, "match_synthetic");
    start.validate();

    MatchResult best;
    best.image = start_image;
    best.shape = start;
    best.iou = iou(start_image, real);

    ShapeModel shape = start;
    BinaryImage current = start_image;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        best.iterations = it;
        ShapeModel next;
        try {
            next = optimize_control_points(real, current, shape, opts.steps);
        } catch (const DomainError&) {
            break;  // the current raster degenerated; keep the best iterate so far
        }
        double moved = 0.0;
        for (std::size_t i = 0; i < next.points.size(); ++i) {
            moved = std::max(moved, std::hypot(next.points[i].x - shape.points[i].x,
                                               next.points[i].y - shape.points[i].y));
        }
        shape = std::move(next);
        current = rasterize(shape, real.width(), real.height());
        const double score = iou(current, real);
        if (score > best.iou) {
            best.iou = score;
            best.image = current;
            best.shape = shape;
        }
        if (moved < opts.tolerance) {
            best.converged = true;
            break;
        }
    }
    return best;
}

GrayImage warp(const GrayImage& img, const Alignment& a) {
    if (!(a.scale > 0.0)) throw DomainError("alignment scale must be positive");
    const int h = img.height();
    const int w = img.width();
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    const double cs = std::cos(a.rotation) / a.scale;
    const double sn = std::sin(a.rotation) / a.scale;
    auto pixel = [&](int r, int c) { return (r < 0 || c < 0 || r >= h || c >= w) ? 0.0 : img(r, c); };
    GrayImage out(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double dx = c - cx - a.tx;
            const double dy = r - cy - a.ty;
            const double sx = cx + cs * dx + sn * dy;
            const double sy = cy - sn * dx + cs * dy;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double tx = sx - x0;
            const double ty = sy - y0;
            const double v = (1 - ty) * ((1 - tx) * pixel(y0, x0) + tx * pixel(y0, x0 + 1)) +
                             ty * ((1 - tx) * pixel(y0 + 1, x0) + tx * pixel(y0 + 1, x0 + 1));
            out(r, c) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

PrototypeResult build_prototype(const std::vector<GrayImage>& images, const PrototypeOptions& opts) {
    if (images.size() < 2) throw DomainError("a prototype needs at least two images");
    const int w = images.front().width();
    const int h = images.front().height();
    for (std::size_t i = 1; i < images.size(); ++i) {
        if (images[i].width() != w || images[i].height() != h) {
            throw ShapeError("prototype image " + std::to_string(i) + " is " + std::to_string(images[i].width()) +
                             "x" + std::to_string(images[i].height()) + ", expected " + std::to_string(w) + "x" +
                             std::to_string(h));
        }
    }
    const auto n = static_cast<double>(images.size());

    PrototypeResult res;
    res.alignments.assign(images.size(), Alignment{});
    res.aligned = images;
    Matrix sum = Matrix::Zero(h, w);
    for (const auto& im : images) sum += im.pixels;

    std::array<double, 4> step{opts.translation_step, opts.translation_step, opts.rotation_step, opts.scale_step};
    auto nudge = [](Alignment a, int p, double delta) {
        switch (p) {
            case 0: a.tx += delta; break;
            case 1: a.ty += delta; break;
            case 2: a.rotation += delta; break;
            default: a.scale *= std::exp(delta); break;
        }
        return a;
    };

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        bool improved = false;
        for (std::size_t i = 0; i < images.size(); ++i) {
            const Matrix others = (sum - res.aligned[i].pixels) / (n - 1.0);
            double cost = (res.aligned[i].pixels - others).squaredNorm();
            for (int p = 0; p < 4; ++p) {
                for (double sign : {1.0, -1.0}) {
                    const Alignment cand = nudge(res.alignments[i], p, sign * step[static_cast<std::size_t>(p)]);
                    GrayImage moved = warp(images[i], cand);
                    const double c = (moved.pixels - others).squaredNorm();
                    if (c < cost - 1e-12) {
                        sum += moved.pixels - res.aligned[i].pixels;
                        res.aligned[i] = std::move(moved);
                        res.alignments[i] = cand;
                        cost = c;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if (!improved) {
            for (double& s : step) s *= 0.5;
        }
    }
    res.prototype = GrayImage(Matrix(sum / n));
    return res;
}

ShapeDistribution fit_mvn(const std::vector<ShapeModel>& shapes, double ridge) {
    if (shapes.size() < 2) throw DomainError("fitting a shape distribution needs at least two shapes");
    const std::size_t pts = shapes.front().points.size();
    for (std::size_t i = 1; i < shapes.size(); ++i) {
        if (shapes[i].points.size() != pts) {
            throw ShapeError("shape " + std::to_string(i) + " has " + std::to_string(shapes[i].points.size()) +
                             " control points, expected " + std::to_string(pts));
        }
    }
    const auto dim = static_cast<Eigen::Index>(2 * pts);
    Matrix x(static_cast<Eigen::Index>(shapes.size()), dim);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        for (std::size_t k = 0; k < pts; ++k) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * k)) = shapes[i].points[k].x;
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * k + 1)) = shapes[i].points[k].y;
        }
    }
    ShapeDistribution d;
    d.mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - d.mean.transpose();
    d.covariance = centered.transpose() * centered / static_cast<double>(shapes.size() - 1);
    d.covariance = 0.5 * (d.covariance + d.covariance.transpose()).eval();
    d.covariance.diagonal().array() += ridge;
    d.edges = shapes.front().edges;
    d.width = shapes.front().width;
    d.height = shapes.front().height;
    return d;
}

std::vector<ShapeModel> sample_shapes(const ShapeDistribution& d, int count, std::uint64_t seed) {
    if (count < 0) throw DomainError("sample count must be non-negative");
    const Eigen::LLT<Matrix> llt(d.covariance);
    if (llt.info() != Eigen::Success) throw DomainError("shape covariance is not positive definite");
    const Matrix l = llt.matrixL();
    Rng rng(seed);
    std::vector<ShapeModel> out;
    out.reserve(static_cast<std::size_t>(count));
    Vector z(d.mean.size());
    for (int s = 0; s < count; ++s) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
        const Vector v = d.mean + l * z;
        ShapeModel shape;
        shape.width = d.width;
        shape.height = d.height;
        shape.edges = d.edges;
        for (Eigen::Index k = 0; k < d.point_count(); ++k) {
            double x = v[2 * k];
            double y = v[2 * k + 1];
            if (d.width > 0) x = std::clamp(x, 0.0, d.width - 1.0);
            if (d.height > 0) y = std::clamp(y, 0.0, d.height - 1.0);
            shape.points.push_back({x, y});
        }
        out.push_back(std::move(shape));
    }
    return out;
}

void write_shape(std::ostream& out, const ShapeModel& shape) {
    const auto old = out.precision(17);
    out << "shape " << shape.points.size() << ' ' << shape.width << ' ' << shape.height << ' '
        << (shape.converged ? 1 : 0) << '\n';
    for (const auto& p : shape.points) out << p.x << ' ' << p.y << '\n';
    out << "edges " << shape.edges.size() << '\n';
    for (const auto& [a, b] : shape.edges) out << a << ' ' << b << '\n';
    out.precision(old);
}

ShapeModel read_shape(std::istream& in) {
    int line_no = 0;
    std::string line;
    auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw ParseError("shape file ended early at line " + std::to_string(line_no + 1) + " (expected " +
                             what + ")");
        }
        ++line_no;
        return std::istringstream(line);
    };
    auto fail = [&](const std::string& msg) {
        throw ParseError("shape file line " + std::to_string(line_no) + ": " + msg);
    };

    ShapeModel s;
    std::size_t n = 0;
    int converged = 0;
    {
        auto ss = next_line("header");
        std::string tag;
        if (!(ss >> tag >> n >> s.width >> s.height >> converged) || tag != "shape") {
            fail("expected 'shape <points> <width> <height> <converged>'");
        }
        s.converged = converged != 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto ss = next_line("a point");
        Point p;
        if (!(ss >> p.x >> p.y)) fail("expected '<x> <y>'");
        s.points.push_back(p);
    }
    std::size_t m = 0;
    {
        auto ss = next_line("edge header");
        std::string tag;
        if (!(ss >> tag >> m) || tag != "edges") fail("expected 'edges <count>'");
    }
    for (std::size_t i = 0; i < m; ++i) {
        auto ss = next_line("an edge");
        int a = 0, b = 0;
        if (!(ss >> a >> b)) fail("expected '<i> <j>'");
        s.edges.emplace_back(a, b);
    }
    s.validate();
    return s;
}

void save_shape(const ShapeModel& shape, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_shape(out, shape);
}

ShapeModel load_shape(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open shape file '" + path + "'");
    return read_shape(in);
}

}  // namespace smcae
