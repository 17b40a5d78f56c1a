#include "smcae/eval.hpp"

#include "smcae/rng.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace smcae::eval {

namespace {

void check_labels(const Labels& predicted, const Labels& actual) {
    if (predicted.empty() || actual.empty()) throw DomainError("f1: empty label vector");
    if (predicted.size() != actual.size())
        throw ShapeError("f1: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(actual.size()) + " labels");
}

double f1_from_counts(double tp, double fp, double fn) {
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

double f1_binary(const Labels& predicted, const Labels& actual, int positive) {
    check_labels(predicted, actual);
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == positive;
        const bool a = actual[i] == positive;
        if (p && a) tp += 1;
        else if (p) fp += 1;
        else if (a) fn += 1;
    }
    return f1_from_counts(tp, fp, fn);
}

double f1_score(const Labels& predicted, const Labels& actual, Averaging avg) {
    check_labels(predicted, actual);
    std::map<int, std::array<double, 3>> counts;  // tp, fp, fn
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] == actual[i]) {
            counts[actual[i]][0] += 1;
        } else {
            counts[predicted[i]][1] += 1;
            counts[actual[i]][2] += 1;
        }
    }
    if (avg == Averaging::micro) {
        double tp = 0, fp = 0, fn = 0;
        for (const auto& [cls, c] : counts) {
            tp += c[0];
            fp += c[1];
            fn += c[2];
        }
        return f1_from_counts(tp, fp, fn);
    }
    double sum = 0;
    for (const auto& [cls, c] : counts) sum += f1_from_counts(c[0], c[1], c[2]);
    return sum / static_cast<double>(counts.size());
}

double accuracy(const Labels& predicted, const Labels& actual) {
    check_labels(predicted, actual);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == actual[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

void ScoredPairs::validate() const {
    if (static_cast<std::size_t>(scores.size()) != genuine.size())
        throw ShapeError("scored pairs: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(genuine.size()) + " labels");
    if (!scores.allFinite()) throw DomainError("scored pairs: non-finite score");
    const auto ng = std::count(genuine.begin(), genuine.end(), true);
    if (ng == 0 || ng == static_cast<std::ptrdiff_t>(genuine.size()))
        throw DomainError("scored pairs: need at least one genuine and one impostor pair");
}

Roc roc_and_auc(const ScoredPairs& sp) {
    sp.validate();
    const auto n = static_cast<std::size_t>(sp.scores.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return sp.scores[static_cast<Eigen::Index>(a)] > sp.scores[static_cast<Eigen::Index>(b)];
    });
    const double ng = static_cast<double>(std::count(sp.genuine.begin(), sp.genuine.end(), true));
    const double ni = static_cast<double>(n) - ng;

    Roc roc;
    roc.curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    double accepted_g = 0, accepted_i = 0;
    for (std::size_t k = 0; k < n;) {
        const double t = sp.scores[static_cast<Eigen::Index>(order[k])];
        while (k < n && sp.scores[static_cast<Eigen::Index>(order[k])] == t) {
            (sp.genuine[order[k]] ? accepted_g : accepted_i) += 1;
            ++k;
        }
        const RocPoint p{accepted_i / ni, accepted_g / ng, t};
        const RocPoint& q = roc.curve.back();
        roc.auc += (p.far - q.far) * (p.vr + q.vr) / 2.0;
        roc.curve.push_back(p);
    }
    return roc;
}

double vr_at_far(const Roc& roc, double far) {
    double best = 0.0;
    for (const auto& p : roc.curve)
        if (p.far <= far) best = std::max(best, p.vr);
    return best;
}

double vr_at_far(const ScoredPairs& sp, double far) { return vr_at_far(roc_and_auc(sp), far); }

std::vector<int> nearest_neighbors(const FeatureMatrix& queries, const FeatureMatrix& gallery) {
    if (gallery.rows() == 0) throw DomainError("nearest neighbors: empty gallery");
    if (queries.cols() != gallery.cols())
        throw ShapeError("nearest neighbors: queries " + shape_string(queries.rows(), queries.cols()) +
                         " vs gallery " + shape_string(gallery.rows(), gallery.cols()));
    std::vector<int> out(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const Vector d = (gallery.rowwise() - queries.row(i)).rowwise().squaredNorm();
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < d.size(); ++j)
            if (d[j] < d[best]) best = j;
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double rank1(const FeatureMatrix& queries, const FeatureMatrix& gallery, const std::vector<int>& truth) {
    if (truth.size() != static_cast<std::size_t>(queries.rows()))
        throw ShapeError("rank1: " + std::to_string(truth.size()) + " ground-truth entries for " +
                         std::to_string(queries.rows()) + " queries");
    if (queries.rows() == 0) throw DomainError("rank1: no queries");
    const auto nn = nearest_neighbors(queries, gallery);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < nn.size(); ++i) hits += nn[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(nn.size());
}

ScoredPairs distance_scores(const FeatureMatrix& queries, const FeatureMatrix& gallery,
                            const std::vector<int>& truth) {
    if (queries.cols() != gallery.cols()) throw ShapeError("distance scores: feature width mismatch");
    if (truth.size() != static_cast<std::size_t>(queries.rows()))
        throw ShapeError("distance scores: ground truth length mismatch");
    ScoredPairs sp;
    sp.scores.resize(queries.rows() * gallery.rows());
    sp.genuine.resize(static_cast<std::size_t>(sp.scores.size()));
    for (Eigen::Index i = 0; i < queries.rows(); ++i) {
        const Vector d = (gallery.rowwise() - queries.row(i)).rowwise().norm();
        for (Eigen::Index j = 0; j < gallery.rows(); ++j) {
            const auto k = i * gallery.rows() + j;
            sp.scores[k] = -d[j];
            sp.genuine[static_cast<std::size_t>(k)] = truth[static_cast<std::size_t>(i)] == j;
        }
    }
    return sp;
}

Matrix rbf_gram(const FeatureMatrix& a, const FeatureMatrix& b, double g_rbf) {
    if (a.cols() != b.cols())
        throw ShapeError("rbf gram: " + shape_string(a.rows(), a.cols()) + " vs " + shape_string(b.rows(), b.cols()));
    if (!(g_rbf > 0.0) || !std::isfinite(g_rbf)) throw DomainError("rbf gram: bandwidth must be positive");
    const Vector na = a.rowwise().squaredNorm();
    const Vector nb = b.rowwise().squaredNorm();
    Matrix k = -2.0 * a * b.transpose();
    k.colwise() += na;
    k.rowwise() += nb.transpose();
    return (-g_rbf * k.cwiseMax(0.0)).array().exp().matrix();
}

namespace {

std::vector<int> all_rows(const Matrix& gram, const std::vector<int>& rows) {
    if (!rows.empty()) return rows;
    std::vector<int> r(static_cast<std::size_t>(gram.rows()));
    std::iota(r.begin(), r.end(), 0);
    return r;
}

void check_problem(const Matrix& gram, const std::vector<int>& targets, double c_box, const std::vector<int>& rows) {
    if (gram.rows() != gram.cols()) throw ShapeError("smo: gram matrix is not square");
    if (targets.size() != static_cast<std::size_t>(gram.rows()))
        throw ShapeError("smo: " + std::to_string(targets.size()) + " targets for a gram matrix of " +
                         std::to_string(gram.rows()) + " rows");
    if (!(c_box > 0.0) || !std::isfinite(c_box)) throw DomainError("smo: box constraint must be positive");
    for (int r : rows)
        if (r < 0 || r >= gram.rows()) throw ShapeError("smo: row index out of range");
    for (int t : targets)
        if (t != 1 && t != -1) throw DomainError("smo: targets must be +1 or -1");
}

// Gradient of the dual objective at alpha over the selected rows.
Vector dual_gradient(const Matrix& gram, const std::vector<int>& y, const Vector& alpha, const std::vector<int>& rows) {
    const auto n = rows.size();
    Vector g = Vector::Constant(static_cast<Eigen::Index>(n), -1.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (alpha[static_cast<Eigen::Index>(j)] == 0.0) continue;
        const double aj = alpha[static_cast<Eigen::Index>(j)] * y[static_cast<std::size_t>(rows[j])];
        for (std::size_t i = 0; i < n; ++i)
            g[static_cast<Eigen::Index>(i)] += y[static_cast<std::size_t>(rows[i])] * aj * gram(rows[i], rows[j]);
    }
    return g;
}

struct Violation {
    double up = -std::numeric_limits<double>::infinity();
    double low = std::numeric_limits<double>::infinity();
    std::size_t i = 0, j = 0;
};

Violation maximal_violation(const std::vector<int>& y, const std::vector<int>& rows, const Vector& alpha,
                            const Vector& grad, double c) {
    Violation v;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        const int yt = y[static_cast<std::size_t>(rows[t])];
        const double a = alpha[static_cast<Eigen::Index>(t)];
        const double s = -yt * grad[static_cast<Eigen::Index>(t)];
        const bool up = yt == 1 ? a < c : a > 0.0;
        const bool low = yt == 1 ? a > 0.0 : a < c;
        if (up && s > v.up) {
            v.up = s;
            v.i = t;
        }
        if (low && s < v.low) {
            v.low = s;
            v.j = t;
        }
    }
    return v;
}

}  // namespace

BinarySolution smo_solve(const Matrix& gram, const std::vector<int>& targets, double c_box, const SmoOptions& opts,
                         const std::vector<int>& subset) {
    check_problem(gram, targets, c_box, subset);
    if (!(opts.tolerance > 0.0)) throw DomainError("smo: tolerance must be positive");
    const auto rows = all_rows(gram, subset);
    const auto n = rows.size();
    const auto& y = targets;
    auto yr = [&](std::size_t t) { return static_cast<double>(y[static_cast<std::size_t>(rows[t])]); };
    auto q = [&](std::size_t a, std::size_t b) { return yr(a) * yr(b) * gram(rows[a], rows[b]); };

    BinarySolution s;
    s.alpha = Vector::Zero(static_cast<Eigen::Index>(n));
    Vector grad = Vector::Constant(static_cast<Eigen::Index>(n), -1.0);
    Vector& alpha = s.alpha;
    const double c = c_box;
    constexpr double tau = 1e-12;

    while (s.iterations < opts.max_iterations) {
        const Violation v = maximal_violation(y, rows, alpha, grad, c);
        if (v.up - v.low < opts.tolerance) {
            s.converged = true;
            break;
        }
        ++s.iterations;
        const std::size_t i = v.i, j = v.j;
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        const double old_i = alpha[ii], old_j = alpha[jj];
        const double qij = q(i, j);
        if (yr(i) != yr(j)) {
            double quad = q(i, i) + q(j, j) + 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (-grad[ii] - grad[jj]) / quad;
            const double diff = alpha[ii] - alpha[jj];
            alpha[ii] += delta;
            alpha[jj] += delta;
            if (diff > 0.0) {
                if (alpha[jj] < 0.0) {
                    alpha[jj] = 0.0;
                    alpha[ii] = diff;
                }
            } else if (alpha[ii] < 0.0) {
                alpha[ii] = 0.0;
                alpha[jj] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[ii] > c) {
                    alpha[ii] = c;
                    alpha[jj] = c - diff;
                }
            } else if (alpha[jj] > c) {
                alpha[jj] = c;
                alpha[ii] = c + diff;
            }
        } else {
            double quad = q(i, i) + q(j, j) - 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            const double delta = (grad[ii] - grad[jj]) / quad;
            const double sum = alpha[ii] + alpha[jj];
            alpha[ii] -= delta;
            alpha[jj] += delta;
            if (sum > c) {
                if (alpha[ii] > c) {
                    alpha[ii] = c;
                    alpha[jj] = sum - c;
                }
            } else if (alpha[jj] < 0.0) {
                alpha[jj] = 0.0;
                alpha[ii] = sum;
            }
            if (sum > c) {
                if (alpha[jj] > c) {
                    alpha[jj] = c;
                    alpha[ii] = sum - c;
                }
            } else if (alpha[ii] < 0.0) {
                alpha[ii] = 0.0;
                alpha[jj] = sum;
            }
        }
        const double di = alpha[ii] - old_i, dj = alpha[jj] - old_j;
        for (std::size_t t = 0; t < n; ++t) grad[static_cast<Eigen::Index>(t)] += q(i, t) * di + q(j, t) * dj;  // row access; the kernel is symmetric
    }

    // Offset from the free multipliers, or the middle of the feasible
    // interval when every multiplier sits at a bound.
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
    int free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = yr(t) * grad[static_cast<Eigen::Index>(t)];
        const double a = alpha[static_cast<Eigen::Index>(t)];
        if (a >= c) {
            if (yr(t) < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (a <= 0.0) {
            if (yr(t) > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free;
            sum_free += yg;
        }
    }
    const double rho = free > 0 ? sum_free / free : (ub + lb) / 2.0;
    s.bias = -rho;
    return s;
}

double kkt_violation(const Matrix& gram, const std::vector<int>& targets, const Vector& alpha, double c_box,
                     const std::vector<int>& subset) {
    check_problem(gram, targets, c_box, subset);
    const auto rows = all_rows(gram, subset);
    if (static_cast<std::size_t>(alpha.size()) != rows.size()) throw ShapeError("kkt: multiplier count mismatch");
    const Vector grad = dual_gradient(gram, targets, alpha, rows);
    const Violation v = maximal_violation(targets, rows, alpha, grad, c_box);
    return std::max(0.0, v.up - v.low);
}

void SvmModel::validate() const {
    if (classes.size() < 2) throw DomainError("svm: need at least two classes");
    if (machines.size() != classes.size()) throw ShapeError("svm: one machine per class required");
    if (!(c_box > 0.0) || !(g_rbf > 0.0)) throw DomainError("svm: hyperparameters must be positive");
    for (const auto& m : machines) {
        if (m.support.rows() != m.coef.size()) throw ShapeError("svm: coefficient count differs from support count");
        if (m.support.rows() > 0 && m.support.cols() != dim) throw ShapeError("svm: support vector width mismatch");
        if (m.coef.size() > 0 && m.coef.cwiseAbs().maxCoeff() > c_box) throw DomainError("svm: multiplier exceeds box");
    }
}

namespace {

void check_training_set(const FeatureMatrix& x, const Labels& y, double c_box, double g_rbf) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw ShapeError("svm: " + std::to_string(x.rows()) + " rows for " + std::to_string(y.size()) + " labels");
    require_finite(x, "svm features");
    if (!(c_box > 0.0) || !std::isfinite(c_box)) throw DomainError("svm: box constraint must be positive");
    if (!(g_rbf > 0.0) || !std::isfinite(g_rbf)) throw DomainError("svm: bandwidth must be positive");
    if (std::set<int>(y.begin(), y.end()).size() < 2) throw DomainError("svm: need at least two classes");
}

std::vector<int> sorted_classes(const Labels& y, const std::vector<int>& rows) {
    std::set<int> s;
    for (int r : rows) s.insert(y[static_cast<std::size_t>(r)]);
    return {s.begin(), s.end()};
}

struct GramMachine {
    Vector alpha;
    double bias = 0.0;
};

// One-vs-rest on the rows of a precomputed kernel.
std::vector<GramMachine> fit_on_gram(const Matrix& gram, const Labels& y, const std::vector<int>& rows,
                                     const std::vector<int>& classes, double c_box, const SmoOptions& opts) {
    std::vector<GramMachine> out;
    std::vector<int> t(y.size(), -1);
    for (int cls : classes) {
        for (int r : rows) t[static_cast<std::size_t>(r)] = y[static_cast<std::size_t>(r)] == cls ? 1 : -1;
        auto s = smo_solve(gram, t, c_box, opts, rows);
        out.push_back({std::move(s.alpha), s.bias});
    }
    return out;
}

int argmax_class(const Matrix& d, Eigen::Index row, const std::vector<int>& classes) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < d.cols(); ++c)
        if (d(row, c) > d(row, best)) best = c;
    return classes[static_cast<std::size_t>(best)];
}

}  // namespace

SvmModel svm_train(const FeatureMatrix& x, const Labels& y, double c_box, double g_rbf, const SmoOptions& opts) {
    check_training_set(x, y, c_box, g_rbf);
    std::vector<int> rows(y.size());
    std::iota(rows.begin(), rows.end(), 0);
    SvmModel m;
    m.classes = sorted_classes(y, rows);
    m.c_box = c_box;
    m.g_rbf = g_rbf;
    m.dim = x.cols();
    const Matrix gram = rbf_gram(x, x, g_rbf);
    const auto fits = fit_on_gram(gram, y, rows, m.classes, c_box, opts);
    for (std::size_t k = 0; k < fits.size(); ++k) {
        BinaryMachine bm;
        std::vector<Eigen::Index> sv;
        for (Eigen::Index i = 0; i < fits[k].alpha.size(); ++i)
            if (fits[k].alpha[i] > 0.0) sv.push_back(i);
        bm.support.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
        bm.coef.resize(static_cast<Eigen::Index>(sv.size()));
        for (std::size_t s = 0; s < sv.size(); ++s) {
            const auto i = sv[s];
            bm.support.row(static_cast<Eigen::Index>(s)) = x.row(i);
            const double yi = y[static_cast<std::size_t>(i)] == m.classes[k] ? 1.0 : -1.0;
            bm.coef[static_cast<Eigen::Index>(s)] = fits[k].alpha[i] * yi;
        }
        bm.bias = fits[k].bias;
        m.machines.push_back(std::move(bm));
    }
    return m;
}

Matrix svm_decision(const SvmModel& m, const FeatureMatrix& x) {
    m.validate();
    if (x.cols() != m.dim)
        throw ShapeError("svm: model expects " + std::to_string(m.dim) + " features, got " + std::to_string(x.cols()));
    Matrix d(x.rows(), static_cast<Eigen::Index>(m.machines.size()));
    for (std::size_t k = 0; k < m.machines.size(); ++k) {
        const auto& bm = m.machines[k];
        const auto c = static_cast<Eigen::Index>(k);
        if (bm.support.rows() == 0) {
            d.col(c).setConstant(bm.bias);
            continue;
        }
        d.col(c) = rbf_gram(x, bm.support, m.g_rbf) * bm.coef;
        d.col(c).array() += bm.bias;
    }
    return d;
}

Labels svm_predict(const SvmModel& m, const FeatureMatrix& x) {
    const Matrix d = svm_decision(m, x);
    Labels out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_class(d, i, m.classes);
    return out;
}

std::vector<int> stratified_folds(const Labels& y, int folds, std::uint64_t seed) {
    if (folds < 2) throw DomainError("folds: need at least two folds");
    std::map<int, std::vector<int>> members;
    for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(static_cast<int>(i));
    for (const auto& [cls, idx] : members)
        if (static_cast<int>(idx.size()) < folds)
            throw DomainError("folds: class " + std::to_string(cls) + " has " + std::to_string(idx.size()) +
                              " members for " + std::to_string(folds) + " folds");
    Rng rng(seed);
    std::vector<int> out(y.size(), 0);
    int next = 0;
    for (auto& [cls, idx] : members) {
        rng.shuffle(idx.begin(), idx.end());
        for (int i : idx) {
            out[static_cast<std::size_t>(i)] = next;
            next = (next + 1) % folds;
        }
    }
    return out;
}

CvResult cross_validate(const FeatureMatrix& x, const Labels& y, std::vector<double> c_grid,
                        std::vector<double> g_grid, int folds, std::uint64_t seed, Averaging avg) {
    if (c_grid.empty() || g_grid.empty()) throw DomainError("cross validation: empty grid");
    check_training_set(x, y, c_grid.front(), g_grid.front());
    std::sort(c_grid.begin(), c_grid.end());
    std::sort(g_grid.begin(), g_grid.end());
    for (double c : c_grid)
        if (!(c > 0.0)) throw DomainError("cross validation: box constraints must be positive");
    for (double g : g_grid)
        if (!(g > 0.0)) throw DomainError("cross validation: bandwidths must be positive");
    const auto fold = stratified_folds(y, folds, seed);

    std::vector<std::vector<int>> train(static_cast<std::size_t>(folds)), val(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < fold.size(); ++i)
        for (int f = 0; f < folds; ++f) (fold[i] == f ? val : train)[static_cast<std::size_t>(f)].push_back(static_cast<int>(i));

    std::map<std::pair<double, double>, double> scores;
    for (double g : g_grid) {
        const Matrix gram = rbf_gram(x, x, g);
        for (double c : c_grid) {
            double total = 0.0;
            for (int f = 0; f < folds; ++f) {
                const auto& tr = train[static_cast<std::size_t>(f)];
                const auto& va = val[static_cast<std::size_t>(f)];
                const auto classes = sorted_classes(y, tr);
                const auto fits = fit_on_gram(gram, y, tr, classes, c, {});
                Matrix d(static_cast<Eigen::Index>(va.size()), static_cast<Eigen::Index>(classes.size()));
                for (std::size_t k = 0; k < fits.size(); ++k) {
                    for (std::size_t v = 0; v < va.size(); ++v) {
                        double s = fits[k].bias;
                        for (std::size_t t = 0; t < tr.size(); ++t) {
                            const double a = fits[k].alpha[static_cast<Eigen::Index>(t)];
                            if (a == 0.0) continue;
                            const double yt = y[static_cast<std::size_t>(tr[t])] == classes[k] ? 1.0 : -1.0;
                            s += a * yt * gram(va[v], tr[t]);
                        }
                        d(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(k)) = s;
                    }
                }
                Labels pred, actual;
                for (std::size_t v = 0; v < va.size(); ++v) {
                    pred.push_back(argmax_class(d, static_cast<Eigen::Index>(v), classes));
                    actual.push_back(y[static_cast<std::size_t>(va[v])]);
                }
                total += f1_score(pred, actual, avg);
            }
            scores[{c, g}] = total / folds;
        }
    }

    CvResult r;
    r.score = -1.0;
    for (double c : c_grid) {
        for (double g : g_grid) {
            const double s = scores.at({c, g});
            r.grid.push_back({{c, g}, s});
            if (s > r.score) {
                r.score = s;
                r.c_box = c;
                r.g_rbf = g;
            }
        }
    }
    return r;
}

std::vector<double> default_c_grid() { return {0.1, 1, 10, 100}; }

std::vector<double> default_g_grid(Eigen::Index dim) {
    if (dim <= 0) throw DomainError("default bandwidth grid: dimension must be positive");
    const double d = static_cast<double>(dim);
    return {0.01 / d, 0.1 / d, 1.0 / d, 10.0 / d};
}

void MetricReport::set(const std::string& key, double value) {
    for (auto& [k, v] : values) {
        if (k == key) {
            v = value;
            return;
        }
    }
    values.emplace_back(key, value);
}

bool MetricReport::has(const std::string& key) const {
    return std::any_of(values.begin(), values.end(), [&](const auto& kv) { return kv.first == key; });
}

double MetricReport::get(const std::string& key) const {
    for (const auto& [k, v] : values)
        if (k == key) return v;
    throw DomainError("metric report: no value named '" + key + "'");
}

std::string MetricReport::to_text() const {
    std::string out;
    for (const auto& [k, v] : values) out += k + "=" + format_double(v) + "\n";
    return out;
}

std::string MetricReport::to_json() const {
    std::string out = "{";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        const double v = values[i].second;
        out += "\"" + values[i].first + "\":" + (std::isfinite(v) ? format_double(v) : std::string("null"));
    }
    return out + "}";
}

MetricReport MetricReport::from_text(const std::string& text) {
    MetricReport r;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError("metric report line " + std::to_string(number) + ": expected key=value");
        const std::string value = line.substr(eq + 1);
        double v = 0.0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size())
            throw ParseError("metric report line " + std::to_string(number) + ": bad number '" + value + "'");
        r.set(line.substr(0, eq), v);
    }
    return r;
}

}  // namespace smcae::eval
