#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "icerbf/collocation.hpp"
#include "icerbf/geometry.hpp"
#include "icerbf/nodes.hpp"

namespace icerbf {

struct PhysicalParams {
    double rho = 900.0;           // ice density [kg m^-3]
    double gravity = 9.81;        // [m s^-2]
    double flow_exponent = 3.0;   // Glen exponent n
    double rate_factor = 1e-16;   // A [Pa^-n a^-1]
    double viscosity_cap = 1e10;  // [Pa a]
    bool constant_viscosity = false;  // pin eta at the cap (linear problem)
};

/// Glen's-law effective viscosity of the flow-line model,
/// eta = 1/2 A^(-1/n) [ (dvx/dx)^2 + 1/4 (dvx/dz)^2 ]^((1-n)/(2n)),
/// clamped from above by the viscosity cap (which also absorbs the
/// zero-strain singularity).
double viscosity(double dvx_dx, double dvx_dz, const PhysicalParams& params);

struct VelocityField {
    Eigen::VectorXd vx;  // [m/a]
    Eigen::VectorXd vz;  // [m/a]
};

enum class RowKind : std::uint8_t { Interior, TopBc, BaseBc, LateralBc };

/// One Picard step of the nonlinear momentum balance: row specifications,
/// row kinds, and the gravity-forcing right-hand side.
struct LinearizedSystem {
    std::vector<RowSpec> rows;
    std::vector<RowKind> row_kinds;
    Eigen::VectorXd rhs;
};

/// Collocation rows for frozen nodal viscosity (and its gradients):
/// interior momentum balance, stress-free top, no-slip base, and the
/// lateral condition the profile prescribes.
LinearizedSystem linearize(const NodeSet& nodes, const DomainProfile& profile,
                           const PhysicalParams& params, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& eta_x, const Eigen::VectorXd& eta_z);

/// linearize() realized as a solvable operator plus its row data.
std::pair<std::unique_ptr<LinearOperator>, LinearizedSystem> assemble_system(
    const Collocation& colloc, const NodeSet& nodes, const DomainProfile& profile,
    const PhysicalParams& params, const Eigen::VectorXd& eta, const Eigen::VectorXd& eta_x,
    const Eigen::VectorXd& eta_z);

struct PicardOptions {
    double tol = 1e-6;
    int max_iter = 100;
    double relaxation = 1.0;      // v <- theta v_new + (1-theta) v_old
    double eta_relaxation = 1.0;  // same damping applied to log(eta)
    // Frozen log-viscosity is smoothed by a compact Wendland-weighted average
    // of this radius (in units of the internodal distance) before it is
    // differentiated; pointwise freezing makes the iteration oscillate where
    // the viscosity varies steeply. Zero disables the filter.
    double eta_filter = 4.0;
};

struct PicardResult {
    VelocityField velocity;  // vz left empty; see vertical_velocity
    bool converged = false;
    int iterations = 0;
    std::vector<double> residual_history;
    std::vector<double> step_history;
    std::vector<std::pair<double, double>> eta_range;
    double assembly_seconds = 0.0;
    double solve_seconds = 0.0;
};

/// Fixed-point iteration on the viscosity: solve the linearized system,
/// refresh eta from the new velocity gradients, repeat until the relative
/// residual of the refreshed system drops below tol. Starts from vx = 0,
/// whose zero strain puts the first iterate at the viscosity cap.
PicardResult picard_solve(const Collocation& colloc, const NodeSet& nodes,
                          const DomainProfile& profile, const PhysicalParams& params,
                          const PicardOptions& opts = {});

/// vz(x, z) = -integral from bed(x) to z of dvx/dx, by composite trapezoid
/// along the vertical line through each node.
Eigen::VectorXd vertical_velocity(const NodeSet& nodes, const DomainProfile& profile,
                                  const std::function<double(const Point2&)>& dvx_dx,
                                  int quadrature_points = 32);

/// Production form: dvx/dx evaluated through the collocation interpolant of
/// the solved vx field.
Eigen::VectorXd vertical_velocity(const Collocation& colloc, const NodeSet& nodes,
                                  const DomainProfile& profile, const Eigen::VectorXd& vx,
                                  int quadrature_points = 32);

}  // namespace icerbf
