#pragma once

#include <memory>
#include <string>
#include <vector>

#include "icerbf/collocation.hpp"
#include "icerbf/linalg.hpp"
#include "icerbf/nodes.hpp"

namespace icerbf {

enum class RbfFamily { GA, MQ, IMQ, IQ };

RbfFamily rbf_family_from_string(const std::string& name);
std::string to_string(RbfFamily f);

/// Radial basis in the scaled (anisotropic) norm.
struct BasisSpec {
    RbfFamily family = RbfFamily::GA;
    double epsilon = 1.0;         // shape parameter [1/m]
    double aspect = 1.0;          // vertical stretch factor a >= 1
    double shape_constant = 0.0;  // C in epsilon = C / h (informational)

    void validate() const;
};

/// epsilon = C / h with h the internodal distance of `nodes` in the scaled norm.
BasisSpec make_basis(RbfFamily family, double shape_constant, const NodeSet& nodes);

/// Distance with the vertical coordinate stretched by the factor a:
/// sqrt((x1-y1)^2 + a^2 (x2-y2)^2).
double aniso_distance(const Point2& x, const Point2& y, double aspect);

/// Analytic derivative of phi(eps, ||x - center||_a) with respect to x.
double rbf_diff(const BasisSpec& spec, DiffOrder order, const Point2& x, const Point2& center);

/// All six derivative orders at once (shares the radial evaluation).
void rbf_diff_all(const BasisSpec& spec, const Point2& x, const Point2& center,
                  double out[kDiffOrders]);

/// Dense symmetric interpolation matrix A_ij = phi(eps, ||x_i - x_j||_a).
/// Coincident nodes are rejected.
Eigen::MatrixXd interpolation_matrix(const BasisSpec& spec, std::span<const Point2> pts);

/// Bisection of the shape constant C against a condition-number target.
struct TuneResult {
    double shape_constant = 0.0;        // least-squares (geometric-mean) fit
    std::vector<double> per_set;        // per-probe constants
    std::vector<double> conditions;     // condition estimates at those constants
    bool warning = false;
    std::string message;
};

/// One probe per coarse node set: returns the condition estimate of the
/// assembled (weighted, when applicable) interpolation matrix at a given C.
using CondProbe = std::function<double(double shape_constant)>;

TuneResult tune_shape_constant(std::span<const CondProbe> probes, double target_cond = 1e16,
                               double c_lo = 1e-3, double c_hi = 10.0, int max_iter = 40);

/// Global collocation over all nodes: dense interpolation and
/// differentiation matrices, one basis function per node.
class GlobalCollocation : public Collocation {
public:
    GlobalCollocation(BasisSpec spec, const NodeSet& nodes);
    ~GlobalCollocation() override;

    int size() const override;
    using Collocation::make_operator;
    std::unique_ptr<LinearOperator> make_operator(std::span<const RowSpec> rows,
                                                  std::array<bool, kDiffOrders> orders) const override;
    Eigen::VectorXd derivative(DiffOrder order, const Eigen::VectorXd& nodal) const override;
    std::unique_ptr<FieldEvaluator> interpolant(const Eigen::VectorXd& nodal) const override;
    double interpolation_condition() const override;

    /// Nodal differentiation matrix D^order * A^-1 (built on first use).
    const Eigen::MatrixXd& nodal_diff_matrix(DiffOrder order) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace icerbf
