#include "smcae/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace smcae::optim {

namespace {

bool finite(double v) { return std::isfinite(v); }

struct Correction {
    Vector s;
    Vector y;
    double rho;
};

// Two-loop recursion: returns -H g with H0 = (s'y / y'y) I from the newest pair.
Vector lbfgs_direction(const Vector& g, const std::deque<Correction>& history) {
    Vector q = -g;
    if (history.empty()) return q;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
        alpha[i] = history[i].rho * history[i].s.dot(q);
        q -= alpha[i] * history[i].y;
    }
    const auto& last = history.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double beta = history[i].rho * history[i].y.dot(q);
        q += (alpha[i] - beta) * history[i].s;
    }
    return q;
}

struct Probe {
    double alpha = 0.0;
    double f = 0.0;
    double dphi = 0.0;
    bool ok() const { return finite(f) && finite(dphi); }
};

// Minimizer of the cubic matching value and slope at a and b, safeguarded to
// stay inside the middle 80% of the interval; falls back to bisection.
double cubic_step(const Probe& a, const Probe& b) {
    const double lo = std::min(a.alpha, b.alpha);
    const double hi = std::max(a.alpha, b.alpha);
    const double width = hi - lo;
    const double mid = 0.5 * (lo + hi);
    if (!a.ok() || !b.ok() || width <= 0.0) return mid;
    const double d1 = a.dphi + b.dphi - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.dphi * b.dphi;
    if (disc < 0.0) return mid;
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    const double denom = b.dphi - a.dphi + 2.0 * d2;
    if (denom == 0.0) return mid;
    const double t = b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
    if (!finite(t) || t < lo + 0.1 * width || t > hi - 0.1 * width) return mid;
    return t;
}

struct SearchOutcome {
    bool accepted = false;    // strong Wolfe point found
    bool have_best = false;   // some trial point decreased f
    bool all_nonfinite = true;
    double best_alpha = 0.0;
    double best_f = 0.0;
    Vector x;
    Vector g;
    double f = 0.0;
};

class StrongWolfeSearch {
public:
    StrongWolfeSearch(const ValueAndGradient& fg, const Vector& x, const Vector& d, double f0,
                      double dphi0, const LineSearchOptions& opts, int& evaluations)
        : fg_(fg), x_(x), d_(d), f0_(f0), dphi0_(dphi0), opts_(opts), evaluations_(evaluations) {
        trial_g_.resize(x.size());
    }

    SearchOutcome run(double alpha) {
        Probe prev{0.0, f0_, dphi0_};
        for (int i = 0; budget_left(); ++i) {
            const Probe cur = probe(alpha);
            if (!cur.ok() || cur.f > f0_ + opts_.c1 * alpha * dphi0_ || (i > 0 && cur.f >= prev.f)) {
                return zoom(prev, cur);
            }
            if (std::abs(cur.dphi) <= -opts_.c2 * dphi0_) return accept(cur);
            if (cur.dphi >= 0.0) return zoom(cur, prev);
            prev = cur;
            alpha *= 2.0;
        }
        return out_;
    }

private:
    bool budget_left() const { return used_ < opts_.max_evaluations; }

    Probe probe(double alpha) {
        trial_x_ = x_ + alpha * d_;
        const double f = fg_(trial_x_, trial_g_);
        ++evaluations_;
        ++used_;
        Probe p{alpha, f, finite(f) ? trial_g_.dot(d_) : std::numeric_limits<double>::quiet_NaN()};
        if (p.ok()) {
            out_.all_nonfinite = false;
            if (f < f0_ && (!out_.have_best || f < out_.best_f)) {
                out_.have_best = true;
                out_.best_alpha = alpha;
                out_.best_f = f;
            }
        }
        return p;
    }

    SearchOutcome accept(const Probe& p) {
        out_.accepted = true;
        out_.x = trial_x_;
        out_.g = trial_g_;
        out_.f = p.f;
        return out_;
    }

    // lo satisfies sufficient decrease with the lower value; hi brackets.
    SearchOutcome zoom(Probe lo, Probe hi) {
        while (budget_left()) {
            const double alpha = cubic_step(lo, hi);
            if (alpha == lo.alpha || alpha == hi.alpha) break;
            const Probe cur = probe(alpha);
            if (!cur.ok() || cur.f > f0_ + opts_.c1 * alpha * dphi0_ || cur.f >= lo.f) {
                hi = cur;
                continue;
            }
            if (std::abs(cur.dphi) <= -opts_.c2 * dphi0_) return accept(cur);
            if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
            lo = cur;
        }
        return out_;
    }

    const ValueAndGradient& fg_;
    const Vector& x_;
    const Vector& d_;
    double f0_;
    double dphi0_;
    const LineSearchOptions& opts_;
    int& evaluations_;
    int used_ = 0;
    Vector trial_x_;
    Vector trial_g_;
    SearchOutcome out_;
};

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

void LbfgsOptions::validate() const {
    if (memory < 1) throw DomainError("L-BFGS memory must be at least 1");
    if (max_iterations < 1) throw DomainError("L-BFGS max_iterations must be positive");
    if (!(tolerance >= 0.0) || !(gradient_tolerance >= 0.0)) {
        throw DomainError("L-BFGS tolerances must be non-negative");
    }
    const auto& ls = line_search;
    if (!(0.0 < ls.c1 && ls.c1 < ls.c2 && ls.c2 < 1.0)) {
        throw DomainError("line search requires 0 < c1 < c2 < 1");
    }
    if (ls.max_evaluations < 1) throw DomainError("line search needs at least one evaluation");
}

const char* to_string(Status s) {
    switch (s) {
        case Status::converged: return "converged";
        case Status::gradient_small: return "gradient_small";
        case Status::max_iterations: return "max_iterations";
        case Status::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

Result minimize(const ValueAndGradient& fg, Vector x0, const LbfgsOptions& opts,
                const IterationCallback& on_iteration) {
    opts.validate();
    Result res;
    res.x = std::move(x0);
    Vector g(res.x.size());
    res.value = fg(res.x, g);
    res.evaluations = 1;
    if (!finite(res.value) || !g.allFinite()) {
        throw OptimizationError("objective or gradient not finite at the starting point", res.x,
                                res.value);
    }
    res.trace.push_back({0, res.value});
    if (inf_norm(g) <= opts.gradient_tolerance) {
        res.status = Status::gradient_small;
        return res;
    }

    std::deque<Correction> history;
    res.status = Status::max_iterations;
    for (int iter = 1; iter <= opts.max_iterations; ++iter) {
        SearchOutcome ls;
        for (int attempt = 0; attempt < 2; ++attempt) {
            Vector d = lbfgs_direction(g, history);
            double dphi0 = g.dot(d);
            if (!(dphi0 < 0.0)) {
                history.clear();
                d = -g;
                dphi0 = -g.squaredNorm();
            }
            const double alpha0 = history.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
            StrongWolfeSearch search(fg, res.x, d, res.value, dphi0, opts.line_search,
                                     res.evaluations);
            ls = search.run(alpha0);
            if (ls.accepted) break;
            if (ls.all_nonfinite) {
                throw OptimizationError("objective or gradient became non-finite", res.x,
                                        res.value);
            }
            if (ls.have_best && history.empty()) {
                // Re-evaluate so the accepted point is the latest evaluation.
                ls.x = res.x + ls.best_alpha * d;
                ls.g.resize(res.x.size());
                ls.f = fg(ls.x, ls.g);
                ++res.evaluations;
                break;
            }
            if (history.empty()) break;
            history.clear();  // retry once along steepest descent
        }

        if (!ls.accepted && !ls.have_best) {
            res.status = Status::line_search_failed;
            break;
        }

        Vector s = ls.x - res.x;
        Vector y = ls.g - g;
        const double sy = s.dot(y);
        if (sy > std::numeric_limits<double>::epsilon() * y.squaredNorm() && sy > 0.0) {
            if (static_cast<int>(history.size()) == opts.memory) history.pop_front();
            history.push_back({std::move(s), std::move(y), 1.0 / sy});
        }

        const double previous = res.value;
        res.x = std::move(ls.x);
        g = std::move(ls.g);
        res.value = ls.f;
        res.iterations = iter;
        res.trace.push_back({iter, res.value});
        if (on_iteration) on_iteration(iter, res.value);

        if (!ls.accepted) {
            res.status = Status::line_search_failed;
            break;
        }
        if (inf_norm(g) <= opts.gradient_tolerance) {
            res.status = Status::gradient_small;
            break;
        }
        const double scale = std::max(std::abs(previous), std::abs(res.value));
        if (std::abs(previous - res.value) <= opts.tolerance * scale) {
            res.status = Status::converged;
            break;
        }
    }
    return res;
}

Result minimize(const Objective& f, const Gradient& g, Vector x0, const LbfgsOptions& opts) {
    const ValueAndGradient fg = [&](const Vector& x, Vector& grad) {
        const double v = f(x);
        if (finite(v)) grad = g(x);
        return v;
    };
    return minimize(fg, std::move(x0), opts);
}

Vector finite_diff(const Objective& f, const Vector& x, double eps) {
    Vector out(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + eps;
        const double up = f(probe);
        probe[i] = x[i] - eps;
        const double down = f(probe);
        probe[i] = x[i];
        out[i] = (up - down) / (2.0 * eps);
    }
    return out;
}

double relative_gradient_error(const Vector& analytic, const Vector& numeric) {
    if (analytic.size() != numeric.size()) {
        throw ShapeError("gradient length " + std::to_string(analytic.size()) +
                         " does not match finite-difference length " +
                         std::to_string(numeric.size()));
    }
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double denom = std::max(1.0, std::abs(analytic[i]) + std::abs(numeric[i]));
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

double check_gradient(const Objective& f, const Gradient& g, const Vector& x, double eps) {
    return relative_gradient_error(g(x), finite_diff(f, x, eps));
}

}  // namespace smcae::optim
