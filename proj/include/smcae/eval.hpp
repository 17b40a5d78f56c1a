#pragma once

// Retrieval and classification metrics plus an RBF-kernel SVM.

#include "smcae/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace smcae::eval {

using Labels = std::vector<int>;

enum class Averaging { macro, micro };

/// Binary F1 for one positive class.
double f1_binary(const Labels& predicted, const Labels& actual, int positive = 1);

/// Multi-class F1. Macro averages the per-class scores over every class seen
/// in either vector; micro pools the counts.
double f1_score(const Labels& predicted, const Labels& actual, Averaging avg = Averaging::macro);

double accuracy(const Labels& predicted, const Labels& actual);

struct ScoredPairs {
    Vector scores;             // similarity, higher is more alike
    std::vector<bool> genuine;

    void validate() const;  // equal lengths, finite, both classes present
};

struct RocPoint {
    double far = 0.0;
    double vr = 0.0;
    double threshold = 0.0;  // accept score >= threshold; +inf for the origin
};

struct Roc {
    std::vector<RocPoint> curve;  // from (0, 0) to (1, 1)
    double auc = 0.0;
};

Roc roc_and_auc(const ScoredPairs& sp);

/// Largest VR among curve points whose FAR does not exceed `far`.
double vr_at_far(const ScoredPairs& sp, double far = 0.001);
double vr_at_far(const Roc& roc, double far = 0.001);

/// Index of the nearest gallery row for each query row by squared Euclidean
/// distance; ties go to the lowest index.
std::vector<int> nearest_neighbors(const FeatureMatrix& queries, const FeatureMatrix& gallery);

/// Fraction of queries whose nearest gallery row is truth[i].
double rank1(const FeatureMatrix& queries, const FeatureMatrix& gallery, const std::vector<int>& truth);

/// All query/gallery pairs scored by negative Euclidean distance.
ScoredPairs distance_scores(const FeatureMatrix& queries, const FeatureMatrix& gallery, const std::vector<int>& truth);

/// K(a, b) = exp(-g * |a - b|^2) for every row pair.
Matrix rbf_gram(const FeatureMatrix& a, const FeatureMatrix& b, double g_rbf);

struct SmoOptions {
    double tolerance = 1e-3;
    long max_iterations = 10'000'000;
};

struct BinarySolution {
    Vector alpha;  // one per training row, in [0, c_box]
    double bias = 0.0;
    long iterations = 0;
    bool converged = false;
};

/// Dual soft-margin SVM on a precomputed kernel with targets +1/-1.
/// `rows` selects the training subset of the Gram matrix; empty means all.
BinarySolution smo_solve(const Matrix& gram, const std::vector<int>& targets, double c_box,
                         const SmoOptions& opts = {}, const std::vector<int>& rows = {});

/// Largest violation of the dual optimality conditions: the gap between the
/// best upward and downward step directions, clamped at zero.
double kkt_violation(const Matrix& gram, const std::vector<int>& targets, const Vector& alpha, double c_box,
                     const std::vector<int>& rows = {});

struct BinaryMachine {
    FeatureMatrix support;
    Vector coef;  // alpha_i * y_i
    double bias = 0.0;
};

struct SvmModel {
    std::vector<int> classes;  // ascending
    std::vector<BinaryMachine> machines;  // one per class, that class against the rest
    double c_box = 1.0;
    double g_rbf = 1.0;
    Eigen::Index dim = 0;

    void validate() const;
};

SvmModel svm_train(const FeatureMatrix& x, const Labels& y, double c_box, double g_rbf, const SmoOptions& opts = {});

/// Decision values, one column per class.
Matrix svm_decision(const SvmModel& m, const FeatureMatrix& x);

/// Argmax over decision values; ties go to the lowest class.
Labels svm_predict(const SvmModel& m, const FeatureMatrix& x);

/// Stratified fold index per row, deterministic in the seed.
std::vector<int> stratified_folds(const Labels& y, int folds, std::uint64_t seed);

struct CvResult {
    double c_box = 0.0;
    double g_rbf = 0.0;
    double score = 0.0;
    std::vector<std::pair<std::pair<double, double>, double>> grid;  // ((c, g), mean F1)
};

/// Grid search by mean validation F1. Ties go to the smallest c_box, then
/// the smallest g_rbf.
CvResult cross_validate(const FeatureMatrix& x, const Labels& y, std::vector<double> c_grid,
                        std::vector<double> g_grid, int folds, std::uint64_t seed,
                        Averaging avg = Averaging::macro);

std::vector<double> default_c_grid();
std::vector<double> default_g_grid(Eigen::Index dim);

/// Ordered name/value pairs.
struct MetricReport {
    std::vector<std::pair<std::string, double>> values;

    void set(const std::string& key, double value);
    double get(const std::string& key) const;  // throws DomainError when absent
    bool has(const std::string& key) const;

    std::string to_text() const;  // key=value per line
    std::string to_json() const;
    static MetricReport from_text(const std::string& text);
};

}  // namespace smcae::eval
