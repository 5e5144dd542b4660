#pragma once

#include <Eigen/Dense>

namespace mmrca {

// Matrix exponential by scaling and squaring with a Taylor core.
// Accurate to roughly machine precision for moderately sized inputs.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

// Dominant eigenpair of a symmetric positive semi-definite matrix.
struct TopEigen {
    double value = 0.0;
    Eigen::VectorXd vector;
};
TopEigen top_eigen_symmetric(const Eigen::MatrixXd& s);

}  // namespace mmrca
