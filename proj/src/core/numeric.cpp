#include "core/numeric.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace idminer::num {

double cosine_similarity(const VectorXd& u, const VectorXd& v) {
    if (u.size() != v.size())
        raise(ErrorKind::Shape, "cosine_similarity: lengths " + std::to_string(u.size()) +
                                    " and " + std::to_string(v.size()) + " differ");
    if (u.size() == 0) raise(ErrorKind::Shape, "cosine_similarity: empty vectors");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) raise(ErrorKind::Domain, "cosine_similarity: zero vector");
    return u.dot(v) / (nu * nv);
}

void require_finite(const MatrixXd& values, const std::string& what) {
    if (!values.allFinite()) raise(ErrorKind::Numeric, what + ": non-finite entry");
}

void require_finite(double value, const std::string& what) {
    if (!std::isfinite(value)) raise(ErrorKind::Numeric, what + ": non-finite value");
}

VectorXd unit_normalize(const VectorXd& v) {
    const double n = v.norm();
    if (n == 0.0) raise(ErrorKind::Domain, "unit_normalize: zero vector");
    return v / n;
}

}  // namespace idminer::num
