#include "icerbf/linalg.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <limits>

namespace icerbf {

double condition_estimate_1norm(
    int n, double norm1,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& solve,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& solve_t) {
    const double inf = std::numeric_limits<double>::infinity();
    if (n == 0) return inf;

    Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
    double est = 0.0;
    int last_j = -1;
    for (int iter = 0; iter < 6; ++iter) {
        Eigen::VectorXd y = solve(x);
        if (!y.allFinite()) return inf;
        est = std::max(est, y.lpNorm<1>());
        Eigen::VectorXd xi(n);
        for (int i = 0; i < n; ++i) xi[i] = y[i] >= 0.0 ? 1.0 : -1.0;
        Eigen::VectorXd z = solve_t(xi);
        if (!z.allFinite()) return inf;
        int j = 0;
        double zmax = z.cwiseAbs().maxCoeff(&j);
        if (zmax <= z.dot(x) || j == last_j) break;
        x.setZero();
        x[j] = 1.0;
        last_j = j;
    }
    return norm1 * est;
}

double condition_estimate(const Eigen::MatrixXd& m) {
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    if ((lu.matrixLU().diagonal().array() == 0.0).any()) return inf;
    double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
    return condition_estimate_1norm(
        (int)m.rows(), norm1,
        [&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return lu.solve(b); },
        [&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return lu.transpose().solve(b); });
}

double condition_estimate(const SpMat& m) {
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::SparseLU<SpMat> lu;
    lu.compute(m);
    if (lu.info() != Eigen::Success) return inf;
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(m.cols());
    for (int j = 0; j < m.outerSize(); ++j)
        for (SpMat::InnerIterator it(m, j); it; ++it) colsum[it.col()] += std::abs(it.value());
    return condition_estimate_1norm(
        (int)m.rows(), colsum.maxCoeff(),
        [&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return lu.solve(b); },
        [&](const Eigen::VectorXd& b) -> Eigen::VectorXd { return lu.transpose().solve(b); });
}

}  // namespace icerbf
