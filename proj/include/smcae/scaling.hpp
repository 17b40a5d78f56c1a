#pragma once

#include "smcae/common.hpp"

namespace smcae {

/// Per-dimension min-max rescaling into [lo, hi], fitted on training data.
/// Dimensions that are constant in the training data map to the midpoint.
struct FeatureScaler {
    Vector min;
    Vector max;
    double lo = 0.1;
    double hi = 0.9;

    static FeatureScaler fit(const FeatureMatrix& x, double lo = 0.1, double hi = 0.9);

    /// Rescales and clips into [0,1] so outputs are valid autoencoder inputs.
    FeatureMatrix apply(const FeatureMatrix& x) const;

    Eigen::Index dim() const { return min.size(); }
    bool empty() const { return min.size() == 0; }
};

}  // namespace smcae
