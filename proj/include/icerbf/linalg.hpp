#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <functional>
#include <memory>
#include <span>

namespace icerbf {

using SpMat = Eigen::SparseMatrix<double>;

/// Differentiation orders supported by the collocation operators
/// (multi-indices up to total degree 2).
enum DiffOrder : int { Val = 0, Dx = 1, Dz = 2, Dxx = 3, Dzz = 4, Dxz = 5 };
constexpr int kDiffOrders = 6;

/// Per-node operator coefficients, indexed by DiffOrder: a row built from
/// coefficients c applies sum_g c[g] * d^g to the interpolated field.
using Coeffs = std::array<double, kDiffOrders>;

/// How one row of a collocation system is built.
struct RowSpec {
    enum class Kind { Operator, Unit, Difference };
    Kind kind = Kind::Operator;
    Coeffs coeff{};  // Operator rows
    int other = -1;  // Difference rows: row = e_self - e_other

    static RowSpec op(const Coeffs& c) { return {Kind::Operator, c, -1}; }
    static RowSpec unit() { return {Kind::Unit, {}, -1}; }
    static RowSpec difference(int other) { return {Kind::Difference, {}, other}; }
};

/// Assembled square collocation system whose operator-row values can be
/// refreshed cheaply when only the coefficients change (fixed pattern).
class LinearOperator {
public:
    virtual ~LinearOperator() = default;
    virtual int size() const = 0;
    /// Refresh values; row kinds and the set of used orders must match the
    /// rows the operator was created with.
    virtual void update(std::span<const RowSpec> rows) = 0;
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& v) const = 0;
    virtual Eigen::VectorXd solve(const Eigen::VectorXd& rhs) = 0;
    virtual double nnz_fraction() const = 0;
    virtual double average_bandwidth() const = 0;
    virtual Eigen::MatrixXd dense() const = 0;
};

/// Hager-style 1-norm condition estimate from solve callbacks.
/// `norm1` is ||M||_1; `solve`/`solve_t` apply M^-1 and M^-T.
/// The estimate is a lower bound on the true condition number, usually
/// within a small factor. Returns +inf when the factorization is singular.
double condition_estimate_1norm(int n, double norm1,
                                const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& solve,
                                const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& solve_t);

double condition_estimate(const Eigen::MatrixXd& m);
double condition_estimate(const SpMat& m);

}  // namespace icerbf
