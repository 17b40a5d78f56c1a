#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smcae {

// Row-major storage keeps the flattened parameter layout identical to the
// in-memory layout (W row-major, then bias).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One row per instance, one column per feature.
using FeatureMatrix = Matrix;

/// Dimension disagreement between two operands.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed input file or stream; message carries the location.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string shape_string(Eigen::Index rows, Eigen::Index cols);

/// Throws ShapeError unless every entry of m is finite.
void require_finite(const Matrix& m, const char* what);

/// Throws DomainError unless every entry lies in [0,1].
void require_unit_interval(const Matrix& m, const char* what);

}  // namespace smcae
