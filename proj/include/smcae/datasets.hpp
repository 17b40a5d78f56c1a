#pragma once

// Loaders for the optical-digits text formats, grayscale images and
// photo/sketch pair directories, plus plain feature CSV files.

#include "smcae/common.hpp"
#include "smcae/hog.hpp"
#include "smcae/synthgen.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace smcae::data {

inline constexpr int kStandardTrainCount = 3823;
inline constexpr int kStandardTestCount = 1797;

struct LabeledFeatures {
    FeatureMatrix features;  // one row per record
    std::vector<int> labels;
};

struct LabeledBitmaps {
    std::vector<BinaryImage> images;
    std::vector<int> labels;
};

/// Preprocessed format: 64 comma-separated counts in 0..16 and a label in
/// 0..9 per line. Throws ParseError naming the file and line.
LabeledFeatures read_optdigits(std::istream& in, const std::string& name = "<stream>");
LabeledFeatures load_optdigits(const std::string& path);
void write_optdigits_record(std::ostream& out, const Eigen::Ref<const Vector>& counts, int label);

/// Original format: optional free-text header, then blocks of 32 lines of
/// 32 '0'/'1' characters, each followed by a line holding the label.
LabeledBitmaps read_optdigits_bitmaps(std::istream& in, const std::string& name = "<stream>");
LabeledBitmaps load_optdigits_bitmaps(const std::string& path);
void write_optdigits_bitmap(std::ostream& out, const BinaryImage& img, int label);

/// Stand-in bitmaps from the 8x8 counts: counts / 16, bilinear resize to
/// size x size, threshold at 0.5.
LabeledBitmaps upsample_counts(const LabeledFeatures& set, int size = 32);

struct DigitData {
    LabeledBitmaps train;
    LabeledBitmaps test;
    std::string bitmap_source;  // "original" or "upsampled-8x8"
    std::vector<std::string> warnings;
};

/// Reads the preprocessed train/test files, or the original bitmap files when
/// both bitmap paths are given. Count mismatches against the standard split
/// become warnings.
DigitData load_digits(const std::string& train_path, const std::string& test_path,
                      const std::string& bitmap_train_path = {}, const std::string& bitmap_test_path = {});

/// Binary or ASCII portable graymap; values scaled to [0,1].
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);
/// Any PNG, converted to 8-bit gray; values scaled to [0,1].
GrayImage read_png(const std::string& path);
/// Dispatches on the extension (.pgm or .png).
GrayImage read_image(const std::string& path);

struct ImagePair {
    std::string id;
    GrayImage photo;
    GrayImage sketch;
};

struct PairSplit {
    std::vector<ImagePair> train;
    std::vector<ImagePair> test;
};

/// Split file lines: "train <id>" or "test <id>"; blank lines and '#'
/// comments are skipped. Each id must have exactly one photo and one sketch
/// whose file stem is the id. Pairs are ordered by id within each part.
PairSplit load_image_pairs(const std::string& photo_dir, const std::string& sketch_dir,
                           const std::string& split_file);

/// Comma-separated numbers, one row per line, no header.
FeatureMatrix read_feature_csv(const std::string& path);
void write_feature_csv(const FeatureMatrix& x, const std::string& path);

}  // namespace smcae::data
