#pragma once

// Experiment pipelines: synthetic digit generation, the digit classification
// study, the sketch-to-photo retrieval study, the balance-weight sweep and the
// gradient check. Results are long-format CSV rows plus a manifest.

#include "smcae/datasets.hpp"
#include "smcae/eval.hpp"
#include "smcae/hog.hpp"
#include "smcae/model.hpp"
#include "smcae/scaling.hpp"
#include "smcae/synthgen.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace smcae::exp {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
    // data
    std::string train_path = "data/optdigits/optdigits.tra";
    std::string test_path = "data/optdigits/optdigits.tes";
    std::string bitmap_train_path;
    std::string bitmap_test_path;
    std::string photo_dir;
    std::string sketch_dir;
    std::string split_file;
    int image_size = 50;  // photos and sketches are resized to a square of this side

    // autoencoder
    SmcaeConfig smcae;
    Variant variant = Variant::smcae;
    bool scale_features = true;  // min-max rescale HOG into [0.1, 0.9] before the autoencoder

    HogConfig hog;

    // synthesis
    int pairs_per_digit = 500;  // real digits matched to a synthetic partner, per class
    int synthetic_per_class = 3000;
    int prototype_images = 100;
    int control_points = 32;
    MatchOptions match;

    // classifier
    int schedule_start = 300;
    int schedule_stop = 3300;
    int schedule_step = 300;
    int replicates = 3;
    int cv_folds = 5;
    int cv_subsample = 1000;  // rows of each training set used to pick its SVM parameters; 0 means all
    double svm_c = 0.0;       // both positive: skip cross-validation
    double svm_g = 0.0;
    eval::Averaging averaging = eval::Averaging::macro;
    bool run_schedule = true;

    std::vector<double> gammas{0, 0.5, 1, 5, 10, 50, 100};
    std::uint64_t seed = 1;
    std::string output_dir = "results";

    void validate() const;
    std::vector<int> schedule() const;

    /// Canonical "key = value" listing of every field except the output
    /// directory, in a fixed order.
    std::string to_text() const;
};

/// 64-bit FNV-1a of the canonical listing, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct ResultRow {
    std::string experiment;
    std::string variant;
    std::string training_set;
    long count = 0;
    std::uint64_t seed = 0;
    std::string metric;
    double value = 0.0;
};

inline constexpr const char* kResultHeader = "experiment,variant,training_set,count,seed,metric,value";

/// Shortest round-trip formatting, so identical runs give identical bytes.
std::string format_number(double v);
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);

struct Manifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string feature_source;
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    std::string config_text;
};

std::string manifest_json(const Manifest& m);
void write_manifest(const Manifest& m, const std::string& path);

using Progress = std::function<void(const std::string&)>;

struct SynthesisOptions {
    int pairs_per_digit = 500;
    int samples_per_class = 3000;
    int prototype_images = 100;
    int control_points = 32;
    MatchOptions match;
    PrototypeOptions prototype;
};

SynthesisOptions synthesis_options(const ExperimentConfig& cfg);

struct DigitSynthesis {
    // Matched pairs for autoencoder training, grouped by class.
    std::vector<BinaryImage> pair_synthetic;
    std::vector<BinaryImage> pair_real;
    std::vector<int> pair_labels;
    // Fresh samples drawn from the per-class shape distributions.
    std::vector<BinaryImage> samples;
    std::vector<int> sample_labels;
    std::vector<BinaryImage> prototypes;  // indexed by class
    std::vector<ShapeModel> prototype_shapes;
    double mean_iou_start = 0.0;  // prototype raster vs real
    double mean_iou_matched = 0.0;
};

/// Classes present in `train` are processed in ascending order; within a
/// class the first images in file order are used.
DigitSynthesis synthesize_digits(const data::LabeledBitmaps& train, const SynthesisOptions& opts,
                                 std::uint64_t seed, const Progress& progress = {});

/// HOG of each bitmap.
FeatureMatrix bitmap_features(const std::vector<BinaryImage>& images, const HogConfig& cfg);

struct SvmChoice {
    double c_box = 0.0;
    double g_rbf = 0.0;
    bool cross_validated = false;
};

SvmChoice choose_svm_parameters(const FeatureMatrix& x, const eval::Labels& y, const ExperimentConfig& cfg);

/// SVM trained on (x, y), macro or micro F1 on the test set.
double svm_f1(const FeatureMatrix& x, const eval::Labels& y, const FeatureMatrix& test_x,
              const eval::Labels& test_y, const SvmChoice& p, eval::Averaging avg);

struct DigitsOutcome {
    std::vector<ResultRow> rows;
    SmcaeModel model;
    SvmChoice svm;  // parameters chosen for the real-only training set
    eval::MetricReport report;
};

/// Synthesis, feature extraction, autoencoder training, the four training
/// sets and, optionally, the growing-count schedule.
DigitsOutcome run_digits_experiment(const ExperimentConfig& cfg, const data::DigitData& data,
                                    const Progress& progress = {});

struct CufsfOutcome {
    std::vector<ResultRow> rows;
    eval::Roc roc_raw;
    eval::Roc roc_transformed;
    eval::MetricReport report;
};

/// Retrieval on precomputed features: an autoencoder is trained on the
/// (sketch, photo) training pairs, test sketches are transformed and matched
/// against test photos. Row i of the test sketches belongs to row i of the
/// test photos. The raw baseline compares unscaled features.
CufsfOutcome retrieval_study(const FeatureMatrix& sketch_train, const FeatureMatrix& photo_train,
                             const FeatureMatrix& sketch_test, const FeatureMatrix& photo_test,
                             const ExperimentConfig& cfg, const Progress& progress = {});

/// HOG of the resized images, then retrieval_study.
CufsfOutcome run_cufsf_experiment(const ExperimentConfig& cfg, const data::PairSplit& pairs,
                                  const Progress& progress = {});

struct GammaRow {
    double gamma = 0.0;
    double f1 = 0.0;  // real + transformed synthetic training set
    int iterations = 0;
};

inline constexpr const char* kGammaHeader = "gamma,f1,iterations";

/// One autoencoder per weight in cfg.gammas on the digit pairs; records the
/// total optimizer iterations and the real+transformed F1.
std::vector<GammaRow> run_gamma_sweep(const ExperimentConfig& cfg, const data::DigitData& data,
                                      const Progress& progress = {});
void write_gamma_csv(std::ostream& out, const std::vector<GammaRow>& rows);

struct GradcheckLine {
    double gamma = 0.0;
    std::string block;
    double error = 0.0;
};

struct GradcheckReport {
    std::vector<GradcheckLine> lines;
    double worst = 0.0;
    bool passed = false;
};

/// Finite-difference check of the channel and two-channel gradients on small
/// random instances. `sabotage` doubles the analytic gradient.
GradcheckReport run_gradcheck(std::uint64_t seed, double threshold = 1e-5, bool sabotage = false);

}  // namespace smcae::exp
