#pragma once

#include <Eigen/Dense>

namespace ocssvm {

// Samples are stored one per row so that a row is a contiguous feature vector.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace ocssvm
