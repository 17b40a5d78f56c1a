#include "smcae/common.hpp"

#include <cmath>
#include <sstream>

namespace smcae {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
    std::ostringstream os;
    os << rows << "x" << cols;
    return os.str();
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw DomainError(std::string(what) + " contains non-finite entries");
    }
}

void require_unit_interval(const Matrix& m, const char* what) {
    require_finite(m, what);
    if (m.size() > 0 && (m.minCoeff() < 0.0 || m.maxCoeff() > 1.0)) {
        throw DomainError(std::string(what) + " has entries outside [0,1]");
    }
}

}  // namespace smcae
