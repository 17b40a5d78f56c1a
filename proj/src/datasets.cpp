#include "smcae/datasets.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace smcae::data {

namespace {

[[noreturn]] void fail(const std::string& name, int line, const std::string& what) {
    throw ParseError(name + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return in;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_int(const std::string& s, int& out) {
    const auto t = trim(s);
    const auto r = std::from_chars(t.data(), t.data() + t.size(), out);
    return !t.empty() && r.ec == std::errc() && r.ptr == t.data() + t.size();
}

bool is_bitmap_row(const std::string& line) {
    return line.size() == 32 && std::all_of(line.begin(), line.end(), [](char c) { return c == '0' || c == '1'; });
}

}  // namespace

LabeledFeatures read_optdigits(std::istream& in, const std::string& name) {
    std::vector<std::array<double, 64>> rows;
    std::vector<int> labels;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty()) continue;
        std::array<double, 64> row{};
        std::stringstream ss(line);
        std::string field;
        int col = 0;
        int label = -1;
        while (std::getline(ss, field, ',')) {
            int v = 0;
            if (!parse_int(field, v)) fail(name, number, "field " + std::to_string(col + 1) + " is not an integer");
            if (col < 64) {
                if (v < 0 || v > 16) fail(name, number, "count " + std::to_string(v) + " outside 0..16");
                row[static_cast<std::size_t>(col)] = v;
            } else if (col == 64) {
                if (v < 0 || v > 9) fail(name, number, "label " + std::to_string(v) + " outside 0..9");
                label = v;
            }
            ++col;
        }
        if (line.back() == ',') fail(name, number, "empty trailing field");
        if (col != 65) fail(name, number, "expected 65 fields, found " + std::to_string(col));
        rows.push_back(row);
        labels.push_back(label);
    }
    LabeledFeatures out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), 64);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int c = 0; c < 64; ++c) out.features(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    out.labels = std::move(labels);
    return out;
}

LabeledFeatures load_optdigits(const std::string& path) {
    auto in = open_input(path);
    return read_optdigits(in, path);
}

void write_optdigits_record(std::ostream& out, const Eigen::Ref<const Vector>& counts, int label) {
    if (counts.size() != 64) throw ShapeError("optdigits record needs 64 counts, got " + std::to_string(counts.size()));
    for (Eigen::Index i = 0; i < 64; ++i) out << static_cast<int>(counts[i]) << ',';
    out << label << '\n';
}

LabeledBitmaps read_optdigits_bitmaps(std::istream& in, const std::string& name) {
    LabeledBitmaps out;
    std::string line;
    int number = 0;
    bool started = false;
    BinaryImage current(32, 32);
    int row = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!started) {
            if (!is_bitmap_row(line)) continue;  // header text
            started = true;
        }
        if (row < 32) {
            if (!is_bitmap_row(line)) fail(name, number, "expected a row of 32 '0'/'1' characters");
            for (int c = 0; c < 32; ++c) current(row, c) = static_cast<std::uint8_t>(line[static_cast<std::size_t>(c)] - '0');
            ++row;
            continue;
        }
        int label = 0;
        if (!parse_int(line, label) || label < 0 || label > 9) fail(name, number, "expected a digit label");
        out.images.push_back(current);
        out.labels.push_back(label);
        row = 0;
    }
    if (row != 0) fail(name, number, "truncated bitmap: " + std::to_string(row) + " of 32 rows and no label");
    return out;
}

LabeledBitmaps load_optdigits_bitmaps(const std::string& path) {
    auto in = open_input(path);
    return read_optdigits_bitmaps(in, path);
}

void write_optdigits_bitmap(std::ostream& out, const BinaryImage& img, int label) {
    if (img.width() != 32 || img.height() != 32) throw ShapeError("bitmap must be 32x32");
    for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) out << (img(r, c) ? '1' : '0');
        out << '\n';
    }
    out << ' ' << label << '\n';
}

LabeledBitmaps upsample_counts(const LabeledFeatures& set, int size) {
    if (set.features.cols() != 64) throw ShapeError("upsampling expects 64 counts per record");
    LabeledBitmaps out;
    out.labels = set.labels;
    for (Eigen::Index i = 0; i < set.features.rows(); ++i) {
        Matrix small(8, 8);
        for (int k = 0; k < 64; ++k) small(k / 8, k % 8) = set.features(i, k) / 16.0;
        const GrayImage big = resize(GrayImage(small), size, size);
        out.images.push_back(binarize(big.pixels, BinarizeMode::intensity, 0.5));
    }
    return out;
}

DigitData load_digits(const std::string& train_path, const std::string& test_path,
                      const std::string& bitmap_train_path, const std::string& bitmap_test_path) {
    DigitData d;
    if (!bitmap_train_path.empty() && !bitmap_test_path.empty()) {
        d.train = load_optdigits_bitmaps(bitmap_train_path);
        d.test = load_optdigits_bitmaps(bitmap_test_path);
        d.bitmap_source = "original";
    } else {
        d.train = upsample_counts(load_optdigits(train_path));
        d.test = upsample_counts(load_optdigits(test_path));
        d.bitmap_source = "upsampled-8x8";
    }
    const auto check = [&](const LabeledBitmaps& s, int expected, const char* part) {
        if (static_cast<int>(s.images.size()) != expected)
            d.warnings.push_back(std::string(part) + " set has " + std::to_string(s.images.size()) +
                                 " records; the standard split has " + std::to_string(expected));
    };
    check(d.train, kStandardTrainCount, "training");
    check(d.test, kStandardTestCount, "test");
    if (d.train.images.empty()) throw DomainError("no training digits in '" + train_path + "'");
    return d;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch = 0;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            if (!tok.empty()) break;
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw ParseError(path + ": truncated graymap header");
    return tok;
}

}  // namespace

GrayImage read_pgm(const std::string& path) {
    auto in = open_input(path);
    const std::string magic = pgm_token(in, path);
    if (magic != "P2" && magic != "P5") throw ParseError(path + ": not a graymap (magic '" + magic + "')");
    int w = 0, h = 0, maxval = 0;
    if (!parse_int(pgm_token(in, path), w) || !parse_int(pgm_token(in, path), h) ||
        !parse_int(pgm_token(in, path), maxval) || w < 1 || h < 1 || maxval < 1 || maxval > 65535)
        throw ParseError(path + ": bad graymap header");
    GrayImage img(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            int v = 0;
            if (magic == "P2") {
                if (!parse_int(pgm_token(in, path), v)) throw ParseError(path + ": bad pixel value");
            } else if (maxval < 256) {
                const int ch = in.get();
                if (ch == EOF) throw ParseError(path + ": truncated pixel data");
                v = ch;
            } else {
                const int hi = in.get(), lo = in.get();
                if (lo == EOF) throw ParseError(path + ": truncated pixel data");
                v = hi * 256 + lo;
            }
            if (v > maxval) throw ParseError(path + ": pixel exceeds maxval");
            img(r, c) = static_cast<double>(v) / maxval;
        }
    }
    return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c)
            out.put(static_cast<char>(std::clamp(static_cast<int>(std::lround(img(r, c) * 255.0)), 0, 255)));
}

GrayImage read_png(const std::string& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw ParseError(path + ": " + image.message);
    image.format = PNG_FORMAT_GRAY;
    std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw ParseError(path + ": " + msg);
    }
    const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
    GrayImage img(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img(r, c) = buf[static_cast<std::size_t>(r) * w + c] / 255.0;
    return img;
}

GrayImage read_image(const std::string& path) {
    auto ext = fs::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm") return read_pgm(path);
    if (ext == ".png") return read_png(path);
    throw ParseError(path + ": unsupported image type '" + ext + "'");
}

namespace {

std::map<std::string, std::string> images_by_stem(const std::string& dir) {
    if (!fs::is_directory(dir)) throw ParseError("image directory '" + dir + "' does not exist");
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext != ".pgm" && ext != ".png") continue;
        const auto stem = e.path().stem().string();
        if (!out.emplace(stem, e.path().string()).second)
            throw ParseError("two images share the identifier '" + stem + "' in '" + dir + "'");
    }
    return out;
}

}  // namespace

PairSplit load_image_pairs(const std::string& photo_dir, const std::string& sketch_dir,
                           const std::string& split_file) {
    const auto photos = images_by_stem(photo_dir);
    const auto sketches = images_by_stem(sketch_dir);
    auto in = open_input(split_file);
    std::set<std::string> train_ids, test_ids;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string part, id, extra;
        ss >> part >> id;
        if (id.empty() || (ss >> extra)) fail(split_file, number, "expected '<train|test> <id>'");
        if (part != "train" && part != "test") fail(split_file, number, "unknown partition '" + part + "'");
        if (train_ids.count(id) || test_ids.count(id)) fail(split_file, number, "identifier '" + id + "' listed twice");
        (part == "train" ? train_ids : test_ids).insert(id);
    }
    std::vector<std::string> missing;
    for (const auto* ids : {&train_ids, &test_ids})
        for (const auto& id : *ids) {
            if (!photos.count(id)) missing.push_back(id + " (photo)");
            if (!sketches.count(id)) missing.push_back(id + " (sketch)");
        }
    if (!missing.empty()) {
        std::string msg = "unmatched identifiers:";
        for (const auto& m : missing) msg += " " + m;
        throw ParseError(msg);
    }
    PairSplit out;
    for (const auto& id : train_ids) out.train.push_back({id, read_image(photos.at(id)), read_image(sketches.at(id))});
    for (const auto& id : test_ids) out.test.push_back({id, read_image(photos.at(id)), read_image(sketches.at(id))});
    return out;
}

FeatureMatrix read_feature_csv(const std::string& path) {
    auto in = open_input(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line);
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            const auto t = trim(field);
            double v = 0.0;
            const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
                fail(path, number, "field " + std::to_string(row.size() + 1) + " is not a number");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            fail(path, number, "expected " + std::to_string(rows.front().size()) + " fields, found " +
                                   std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": no rows");
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return x;
}

void write_feature_csv(const FeatureMatrix& x, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write '" + path + "'");
    char buf[64];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (j > 0) out << ',';
            const auto r = std::to_chars(buf, buf + sizeof buf, x(i, j));
            out.write(buf, r.ptr - buf);
        }
        out << '\n';
    }
}

}  // namespace smcae::data
