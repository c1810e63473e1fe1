#pragma once

#include <Eigen/Dense>
#include <string>

namespace idminer::num {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Cosine of the angle between two nonzero vectors of equal length.
double cosine_similarity(const VectorXd& u, const VectorXd& v);

// Raise a numeric error naming `what` if any entry is NaN or infinite.
void require_finite(const MatrixXd& values, const std::string& what);
void require_finite(double value, const std::string& what);

// v / ||v||; raises on the zero vector.
VectorXd unit_normalize(const VectorXd& v);

}  // namespace idminer::num
