#include "mmrca/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

namespace mmrca {

Eigen::MatrixXd expm(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("expm: matrix must be square");
    const auto n = a.rows();
    if (n == 0) return a;

    // Scale so that ||a / 2^s||_1 <= 0.5, then the Taylor tail beyond 20 terms
    // is far below double precision.
    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);

    Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
    for (int k = 1; k <= 20; ++k) {
        term = term * scaled / static_cast<double>(k);
        result += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    for (int s = 0; s < squarings; ++s) result = result * result;
    return result;
}

TopEigen top_eigen_symmetric(const Eigen::MatrixXd& s) {
    if (s.rows() != s.cols() || s.rows() == 0) throw std::invalid_argument("top_eigen_symmetric: bad shape");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success) throw std::runtime_error("top_eigen_symmetric: eigensolver failed");
    const auto last = s.rows() - 1;  // eigenvalues are sorted ascending
    return {solver.eigenvalues()(last), solver.eigenvectors().col(last)};
}

}  // namespace mmrca
