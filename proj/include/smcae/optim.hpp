#pragma once

// Deterministic full-batch L-BFGS (two-loop recursion, strong-Wolfe line
// search) and central finite differences for gradient checking.

#include "smcae/common.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace smcae::optim {

/// Returns f(x) and writes the gradient into grad (already sized like x).
using ValueAndGradient = std::function<double(const Vector& x, Vector& grad)>;
using Objective = std::function<double(const Vector& x)>;
using Gradient = std::function<Vector(const Vector& x)>;

struct LineSearchOptions {
    double c1 = 1e-4;  // sufficient decrease
    double c2 = 0.9;   // curvature
    int max_evaluations = 30;
};

struct LbfgsOptions {
    int memory = 10;
    int max_iterations = 400;
    /// Stop when |f_prev - f| / max(|f_prev|, |f|) falls below this.
    double tolerance = 1e-7;
    /// Stop when the infinity norm of the gradient falls below this.
    double gradient_tolerance = 1e-10;
    LineSearchOptions line_search;

    void validate() const;
};

enum class Status {
    converged,           // relative objective change below tolerance
    gradient_small,      // gradient norm below gradient_tolerance
    max_iterations,
    line_search_failed,  // best iterate returned, flagged as a warning
};

const char* to_string(Status s);

struct TracePoint {
    int iteration = 0;
    double value = 0.0;
};

struct Result {
    Vector x;
    double value = 0.0;
    std::vector<TracePoint> trace;  // iteration 0 is the starting point
    int iterations = 0;
    int evaluations = 0;
    Status status = Status::max_iterations;

    bool warning() const { return status == Status::line_search_failed; }
};

/// Raised when the objective or gradient stops being finite; carries the
/// last iterate at which both were finite.
class OptimizationError : public std::runtime_error {
public:
    OptimizationError(const std::string& what, Vector last_x, double last_value)
        : std::runtime_error(what), last_x_(std::move(last_x)), last_value_(last_value) {}

    const Vector& last_x() const { return last_x_; }
    double last_value() const { return last_value_; }

private:
    Vector last_x_;
    double last_value_;
};

/// Called after each accepted step. The accepted point is always the most
/// recent point passed to the objective.
using IterationCallback = std::function<void(int iteration, double value)>;

Result minimize(const ValueAndGradient& fg, Vector x0, const LbfgsOptions& opts,
                const IterationCallback& on_iteration = {});

Result minimize(const Objective& f, const Gradient& g, Vector x0, const LbfgsOptions& opts);

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
Vector finite_diff(const Objective& f, const Vector& x, double eps = 1e-5);

/// max_i |g_i - fd_i| / max(1, |g_i| + |fd_i|).
double relative_gradient_error(const Vector& analytic, const Vector& numeric);

double check_gradient(const Objective& f, const Gradient& g, const Vector& x, double eps = 1e-5);

}  // namespace smcae::optim
