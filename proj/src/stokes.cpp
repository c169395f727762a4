#include "icerbf/stokes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace icerbf {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Row-normalized Wendland-weighted local averaging in the scaled norm.
SpMat averaging_matrix(const NodeSet& nodes, double radius) {
    const int n = nodes.size();
    std::vector<std::vector<Eigen::Triplet<double>>> rows(n);
#pragma omp parallel for schedule(dynamic, 32)
    for (int i = 0; i < n; ++i) {
        double wsum = 0.0;
        auto& row = rows[i];
        for (int j = 0; j < n; ++j) {
            double dx = nodes.pts[i].x - nodes.pts[j].x;
            if (std::abs(dx) >= radius) continue;
            double dz = nodes.aspect * (nodes.pts[i].z - nodes.pts[j].z);
            double d = std::sqrt(dx * dx + dz * dz) / radius;
            if (d >= 1.0) continue;
            double t = 1.0 - d;
            double w = t * t * t * t * (4.0 * d + 1.0);
            row.emplace_back(i, j, w);
            wsum += w;
        }
        for (auto& t : row) t = {i, (int)t.col(), t.value() / wsum};
    }
    std::vector<Eigen::Triplet<double>> trip;
    for (auto& row : rows) trip.insert(trip.end(), row.begin(), row.end());
    SpMat s(n, n);
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

}  // namespace

double viscosity(double dvx_dx, double dvx_dz, const PhysicalParams& params) {
    if (params.constant_viscosity) return params.viscosity_cap;
    const double n = params.flow_exponent;
    const double strain2 = dvx_dx * dvx_dx + 0.25 * dvx_dz * dvx_dz;
    if (strain2 <= 0.0) return params.viscosity_cap;
    const double eta = 0.5 * std::pow(params.rate_factor, -1.0 / n) *
                       std::pow(strain2, (1.0 - n) / (2.0 * n));
    return std::min(eta, params.viscosity_cap);
}

LinearizedSystem linearize(const NodeSet& nodes, const DomainProfile& profile,
                           const PhysicalParams& params, const Eigen::VectorXd& eta,
                           const Eigen::VectorXd& eta_x, const Eigen::VectorXd& eta_z) {
    const int n = nodes.size();
    if (eta.size() != n || eta_x.size() != n || eta_z.size() != n)
        throw std::invalid_argument("linearize: viscosity field size mismatch");

    const bool periodic = profile.lateral_bc == LateralBc::Periodic;
    std::vector<int> pair_of(n, -1);
    for (size_t i = 0; i < nodes.periodic_left.size(); ++i)
        pair_of[nodes.periodic_left[i]] = nodes.periodic_right[i];

    LinearizedSystem sys;
    sys.rows.resize(n);
    sys.row_kinds.resize(n);
    sys.rhs = Eigen::VectorXd::Zero(n);

    auto momentum_row = [&](int i) {
        Coeffs c{};
        c[Dxx] = 4.0 * eta[i];
        c[Dx] = 4.0 * eta_x[i];
        c[Dzz] = eta[i];
        c[Dz] = eta_z[i];
        sys.rows[i] = RowSpec::op(c);
        sys.rhs[i] = params.rho * params.gravity * profile.surface_slope(nodes.pts[i].x);
    };

    for (int i = 0; i < n; ++i) {
        const Point2 p = nodes.pts[i];
        switch (nodes.tags[i]) {
            case NodeTag::Interior:
                sys.row_kinds[i] = RowKind::Interior;
                momentum_row(i);
                break;
            case NodeTag::Surface: {
                // Stress-free top with the common viscosity factor divided
                // out, which keeps the row scale independent of eta.
                sys.row_kinds[i] = RowKind::TopBc;
                Coeffs c{};
                c[Dx] = 4.0 * profile.surface_slope(p.x);
                c[Dz] = -1.0;
                sys.rows[i] = RowSpec::op(c);
                break;
            }
            case NodeTag::Base:
                sys.row_kinds[i] = RowKind::BaseBc;
                sys.rows[i] = RowSpec::unit();
                break;
            case NodeTag::LeftLateral:
                sys.row_kinds[i] = RowKind::LateralBc;
                if (periodic) {
                    if (pair_of[i] < 0)
                        throw std::invalid_argument("linearize: unpaired periodic node");
                    sys.rows[i] = RowSpec::difference(pair_of[i]);
                } else {
                    sys.rows[i] = RowSpec::unit();
                }
                break;
            case NodeTag::RightLateral:
                sys.row_kinds[i] = RowKind::LateralBc;
                if (periodic)
                    momentum_row(i);  // the matching equality row lives on the left
                else
                    sys.rows[i] = RowSpec::unit();
                break;
        }
    }
    return sys;
}

std::pair<std::unique_ptr<LinearOperator>, LinearizedSystem> assemble_system(
    const Collocation& colloc, const NodeSet& nodes, const DomainProfile& profile,
    const PhysicalParams& params, const Eigen::VectorXd& eta, const Eigen::VectorXd& eta_x,
    const Eigen::VectorXd& eta_z) {
    LinearizedSystem sys = linearize(nodes, profile, params, eta, eta_x, eta_z);
    std::array<bool, kDiffOrders> orders{};
    orders[Dx] = orders[Dz] = orders[Dxx] = orders[Dzz] = true;
    auto op = colloc.make_operator(sys.rows, orders);
    return {std::move(op), std::move(sys)};
}

PicardResult picard_solve(const Collocation& colloc, const NodeSet& nodes,
                          const DomainProfile& profile, const PhysicalParams& params,
                          const PicardOptions& opts) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("picard_solve: tol must be positive");
    const int n = colloc.size();
    const double floor = 1e-300;

    PicardResult result;
    Eigen::VectorXd vx = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd eta(n), eta_x(n), eta_z(n), log_eta(n);

    // Zero initial velocity: zero strain everywhere, so the first linear
    // solve runs at the viscosity cap.
    for (int i = 0; i < n; ++i) eta[i] = viscosity(0.0, 0.0, params);
    log_eta = eta.array().log().matrix();
    eta_x.setZero();
    eta_z.setZero();

    SpMat filter;
    if (opts.eta_filter > 0.0)
        filter = averaging_matrix(nodes, opts.eta_filter * nodes.internodal_distance());

    auto t_asm = std::chrono::steady_clock::now();
    auto [op, sys] = assemble_system(colloc, nodes, profile, params, eta, eta_x, eta_z);
    result.assembly_seconds += seconds_since(t_asm);
    const double rhs_scale = std::max(sys.rhs.lpNorm<Eigen::Infinity>(), floor);

    for (int it = 1; it <= opts.max_iter; ++it) {
        auto t_solve = std::chrono::steady_clock::now();
        Eigen::VectorXd vx_new = op->solve(sys.rhs);
        result.solve_seconds += seconds_since(t_solve);
        if (!vx_new.allFinite())
            throw std::runtime_error("picard_solve: non-finite iterate at iteration " +
                                     std::to_string(it));
        vx_new = opts.relaxation * vx_new + (1.0 - opts.relaxation) * vx;
        const double step = (vx_new - vx).lpNorm<Eigen::Infinity>() /
                            std::max(vx_new.lpNorm<Eigen::Infinity>(), floor);
        vx = vx_new;
        result.iterations = it;
        result.step_history.push_back(step);

        // Refresh the frozen viscosity from the new gradients: the raw
        // nodal field is filtered and damped in log space, then
        // differentiated for the expanded-form coefficients.
        t_asm = std::chrono::steady_clock::now();
        if (params.constant_viscosity) {
            // eta is spatially constant; its gradients vanish identically.
        } else {
            Eigen::VectorXd sx = colloc.derivative(Dx, vx);
            Eigen::VectorXd sz = colloc.derivative(Dz, vx);
            Eigen::VectorXd log_raw(n);
#pragma omp parallel for schedule(static)
            for (int i = 0; i < n; ++i) log_raw[i] = std::log(viscosity(sx[i], sz[i], params));
            if (opts.eta_filter > 0.0) log_raw = filter * log_raw;
            log_eta = opts.eta_relaxation * log_raw + (1.0 - opts.eta_relaxation) * log_eta;
            eta = log_eta.array().exp().matrix();
            eta_x = colloc.derivative(Dx, eta);
            eta_z = colloc.derivative(Dz, eta);
        }
        sys = linearize(nodes, profile, params, eta, eta_x, eta_z);
        op->update(sys.rows);
        result.assembly_seconds += seconds_since(t_asm);

        const double residual = (op->apply(vx) - sys.rhs).lpNorm<Eigen::Infinity>() / rhs_scale;
        result.residual_history.push_back(residual);
        result.eta_range.emplace_back(eta.minCoeff(), eta.maxCoeff());
        if (residual < opts.tol) {
            result.converged = true;
            break;
        }
    }
    result.velocity.vx = std::move(vx);
    return result;
}

Eigen::VectorXd vertical_velocity(const NodeSet& nodes, const DomainProfile& profile,
                                  const std::function<double(const Point2&)>& dvx_dx,
                                  int quadrature_points) {
    if (quadrature_points < 2)
        throw std::invalid_argument("vertical_velocity: need at least 2 quadrature points");
    const int n = nodes.size();
    Eigen::VectorXd vz(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < n; ++i) {
        const double x = nodes.pts[i].x;
        const double zb = profile.bed(x);
        const double zt = std::min(std::max(nodes.pts[i].z, zb), profile.surface(x));
        if (zt <= zb) {
            vz[i] = 0.0;
            continue;
        }
        const double dz = (zt - zb) / (quadrature_points - 1);
        double acc = 0.0;
        for (int q = 0; q < quadrature_points; ++q) {
            const double weight = (q == 0 || q == quadrature_points - 1) ? 0.5 : 1.0;
            acc += weight * dvx_dx({x, zb + q * dz});
        }
        vz[i] = -acc * dz;
    }
    return vz;
}

Eigen::VectorXd vertical_velocity(const Collocation& colloc, const NodeSet& nodes,
                                  const DomainProfile& profile, const Eigen::VectorXd& vx,
                                  int quadrature_points) {
    auto interp = colloc.interpolant(vx);
    return vertical_velocity(
        nodes, profile, [&](const Point2& p) { return (*interp)(p, Dx); }, quadrature_points);
}

}  // namespace icerbf
