#include "smcae/scaling.hpp"

#include <algorithm>
#include <string>

namespace smcae {

FeatureScaler FeatureScaler::fit(const FeatureMatrix& x, double lo, double hi) {
    if (x.rows() == 0) throw ShapeError("cannot fit a scaler on zero instances");
    if (!(lo < hi)) throw DomainError("scaler range must satisfy lo < hi");
    require_finite(x, "scaler training data");
    FeatureScaler s;
    s.min = x.colwise().minCoeff().transpose();
    s.max = x.colwise().maxCoeff().transpose();
    s.lo = lo;
    s.hi = hi;
    return s;
}

FeatureMatrix FeatureScaler::apply(const FeatureMatrix& x) const {
    if (x.cols() != dim()) {
        throw ShapeError("scaler fitted on " + std::to_string(dim()) + " features, got " +
                         std::to_string(x.cols()));
    }
    FeatureMatrix out(x.rows(), x.cols());
    const double mid = 0.5 * (lo + hi);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double span = max[j] - min[j];
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double v = span > 0.0 ? lo + (x(i, j) - min[j]) / span * (hi - lo) : mid;
            out(i, j) = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

}  // namespace smcae
