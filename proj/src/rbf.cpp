#include "icerbf/rbf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace icerbf {

RbfFamily rbf_family_from_string(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back((char)std::tolower((unsigned char)c));
    if (s == "ga" || s == "gaussian") return RbfFamily::GA;
    if (s == "mq" || s == "multiquadric") return RbfFamily::MQ;
    if (s == "imq") return RbfFamily::IMQ;
    if (s == "iq") return RbfFamily::IQ;
    throw std::invalid_argument("unknown RBF family: " + name);
}

std::string to_string(RbfFamily f) {
    switch (f) {
        case RbfFamily::GA: return "ga";
        case RbfFamily::MQ: return "mq";
        case RbfFamily::IMQ: return "imq";
        default: return "iq";
    }
}

void BasisSpec::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("BasisSpec: epsilon must be positive");
    if (!(aspect >= 1.0)) throw std::invalid_argument("BasisSpec: aspect must be >= 1");
}

BasisSpec make_basis(RbfFamily family, double shape_constant, const NodeSet& nodes) {
    BasisSpec s;
    s.family = family;
    s.aspect = nodes.aspect;
    s.shape_constant = shape_constant;
    s.epsilon = shape_constant / nodes.internodal_distance();
    s.validate();
    return s;
}

double aniso_distance(const Point2& x, const Point2& y, double aspect) {
    double dx = x.x - y.x;
    double dz = aspect * (x.z - y.z);
    return std::sqrt(dx * dx + dz * dz);
}

namespace {

// phi and its first two derivatives with respect to s = (eps*r)^2.
inline void phi_s(RbfFamily fam, double s, double& f0, double& f1, double& f2) {
    switch (fam) {
        case RbfFamily::GA: {
            double e = std::exp(-s);
            f0 = e;
            f1 = -e;
            f2 = e;
            break;
        }
        case RbfFamily::MQ: {
            double t = 1.0 + s;
            double r = std::sqrt(t);
            f0 = r;
            f1 = 0.5 / r;
            f2 = -0.25 / (t * r);
            break;
        }
        case RbfFamily::IMQ: {
            double t = 1.0 + s;
            double r = std::sqrt(t);
            f0 = 1.0 / r;
            f1 = -0.5 / (t * r);
            f2 = 0.75 / (t * t * r);
            break;
        }
        default: {  // IQ
            double t = 1.0 + s;
            f0 = 1.0 / t;
            f1 = -1.0 / (t * t);
            f2 = 2.0 / (t * t * t);
            break;
        }
    }
}

}  // namespace

void rbf_diff_all(const BasisSpec& spec, const Point2& x, const Point2& center,
                  double out[kDiffOrders]) {
    const double e2 = spec.epsilon * spec.epsilon;
    const double a2 = spec.aspect * spec.aspect;
    const double u = x.x - center.x;
    const double w = x.z - center.z;
    const double s = e2 * (u * u + a2 * w * w);
    double f0, f1, f2;
    phi_s(spec.family, s, f0, f1, f2);
    out[Val] = f0;
    out[Dx] = f1 * 2.0 * e2 * u;
    out[Dz] = f1 * 2.0 * e2 * a2 * w;
    out[Dxx] = f2 * 4.0 * e2 * e2 * u * u + f1 * 2.0 * e2;
    out[Dzz] = f2 * 4.0 * e2 * e2 * a2 * a2 * w * w + f1 * 2.0 * e2 * a2;
    out[Dxz] = f2 * 4.0 * e2 * e2 * a2 * u * w;
}

double rbf_diff(const BasisSpec& spec, DiffOrder order, const Point2& x, const Point2& center) {
    if (order < 0 || order >= kDiffOrders)
        throw std::invalid_argument("rbf_diff: unsupported derivative order");
    double all[kDiffOrders];
    rbf_diff_all(spec, x, center, all);
    return all[order];
}

Eigen::MatrixXd interpolation_matrix(const BasisSpec& spec, std::span<const Point2> pts) {
    spec.validate();
    const int n = (int)pts.size();
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double r = aniso_distance(pts[i], pts[j], spec.aspect);
            if (i != j && r == 0.0)
                throw std::invalid_argument("interpolation_matrix: coincident nodes " +
                                            std::to_string(i) + " and " + std::to_string(j));
            double s = spec.epsilon * spec.epsilon * r * r;
            double f0, f1, f2;
            phi_s(spec.family, s, f0, f1, f2);
            a(i, j) = f0;
            a(j, i) = f0;
        }
    }
    return a;
}

TuneResult tune_shape_constant(std::span<const CondProbe> probes, double target_cond,
                               double c_lo, double c_hi, int max_iter) {
    if (probes.empty()) throw std::invalid_argument("tune_shape_constant: no probes");
    TuneResult result;
    const double log_target = std::log10(target_cond);

    for (const CondProbe& probe : probes) {
        // The condition number decreases monotonically as C grows (wider
        // functions are worse conditioned), so bisect on log C.
        double lo = c_lo, hi = c_hi;
        double cond_lo = probe(lo);
        double cond_hi = probe(hi);
        double best_c = lo, best_gap = std::numeric_limits<double>::infinity();
        auto consider = [&](double c, double cond) {
            double gap = std::abs(std::log10(cond) - log_target);
            if (std::isfinite(gap) && gap < best_gap) {
                best_gap = gap;
                best_c = c;
            }
            return gap;
        };
        consider(lo, cond_lo);
        consider(hi, cond_hi);

        if (!(cond_lo >= target_cond && target_cond >= cond_hi)) {
            // Target outside the range this basis can reach; report the
            // admissible bound that comes closest.
            result.warning = true;
            result.message = "target condition outside reachable range; bound returned";
            bool need_large_c = target_cond < cond_hi;
            result.per_set.push_back(need_large_c ? hi : lo);
            result.conditions.push_back(need_large_c ? cond_hi : cond_lo);
            continue;
        }

        double gap = best_gap;
        for (int it = 0; it < max_iter && gap > 1.0; ++it) {
            double mid = std::sqrt(lo * hi);
            double cond = probe(mid);
            gap = consider(mid, cond);
            if (!std::isfinite(cond) || cond > target_cond)
                lo = mid;
            else
                hi = mid;
        }
        if (gap > 1.0) {
            result.warning = true;
            result.message = "bisection did not reach the target band; best value returned";
        }
        result.per_set.push_back(best_c);
        result.conditions.push_back(probe(best_c));
    }

    // Constant least-squares fit across the sets, done in log space.
    double acc = 0.0;
    for (double c : result.per_set) acc += std::log(c);
    result.shape_constant = std::exp(acc / result.per_set.size());
    return result;
}

// ---------------------------------------------------------------------------
// Global collocation

namespace {

class DenseOperator final : public LinearOperator {
public:
    DenseOperator(const GlobalCollocation& colloc, std::span<const RowSpec> rows,
                  std::array<bool, kDiffOrders> orders)
        : colloc_(colloc), orders_(orders), mat_(rows.size(), rows.size()) {
        update(rows);
    }

    int size() const override { return (int)mat_.rows(); }

    void update(std::span<const RowSpec> rows) override {
        const int n = (int)rows.size();
        mat_.setZero();
        for (int g = 0; g < kDiffOrders; ++g) {
            if (!orders_[g]) continue;
            const Eigen::MatrixXd& psi = colloc_.nodal_diff_matrix((DiffOrder)g);
            for (int i = 0; i < n; ++i) {
                if (rows[i].kind != RowSpec::Kind::Operator) continue;
                double c = rows[i].coeff[g];
                if (c != 0.0) mat_.row(i) += c * psi.row(i);
            }
        }
        for (int i = 0; i < n; ++i) {
            if (rows[i].kind == RowSpec::Kind::Unit) {
                mat_(i, i) = 1.0;
            } else if (rows[i].kind == RowSpec::Kind::Difference) {
                mat_(i, i) = 1.0;
                mat_(i, rows[i].other) = -1.0;
            } else {
                for (int g = 0; g < kDiffOrders; ++g)
                    if (rows[i].coeff[g] != 0.0 && !orders_[g])
                        throw std::logic_error("DenseOperator: order not declared at creation");
            }
        }
        dirty_ = true;
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override { return mat_ * v; }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) override {
        if (dirty_) {
            lu_.compute(mat_);
            dirty_ = false;
        }
        return lu_.solve(rhs);
    }

    double nnz_fraction() const override { return 1.0; }
    double average_bandwidth() const override { return (double)mat_.cols(); }
    Eigen::MatrixXd dense() const override { return mat_; }

private:
    const GlobalCollocation& colloc_;
    std::array<bool, kDiffOrders> orders_;
    Eigen::MatrixXd mat_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    bool dirty_ = true;
};

class GlobalEvaluator final : public FieldEvaluator {
public:
    GlobalEvaluator(const BasisSpec& spec, std::vector<Point2> centers, Eigen::VectorXd lambda)
        : spec_(spec), centers_(std::move(centers)), lambda_(std::move(lambda)) {}

    double operator()(const Point2& p, DiffOrder order) const override {
        double acc = 0.0, all[kDiffOrders];
        for (size_t j = 0; j < centers_.size(); ++j) {
            rbf_diff_all(spec_, p, centers_[j], all);
            acc += lambda_[(Eigen::Index)j] * all[order];
        }
        return acc;
    }

private:
    BasisSpec spec_;
    std::vector<Point2> centers_;
    Eigen::VectorXd lambda_;
};

}  // namespace

struct GlobalCollocation::Impl {
    BasisSpec spec;
    std::vector<Point2> pts;
    Eigen::MatrixXd interp;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    mutable std::array<std::unique_ptr<Eigen::MatrixXd>, kDiffOrders> psi;
};

GlobalCollocation::GlobalCollocation(BasisSpec spec, const NodeSet& nodes)
    : impl_(std::make_unique<Impl>()) {
    spec.validate();
    impl_->spec = spec;
    impl_->pts = nodes.pts;
    impl_->interp = interpolation_matrix(spec, impl_->pts);
    impl_->lu.compute(impl_->interp);
}

GlobalCollocation::~GlobalCollocation() = default;

int GlobalCollocation::size() const { return (int)impl_->pts.size(); }

const Eigen::MatrixXd& GlobalCollocation::nodal_diff_matrix(DiffOrder order) const {
    auto& slot = impl_->psi[order];
    if (!slot) {
        const int n = size();
        Eigen::MatrixXd d(n, n);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            double all[kDiffOrders];
            for (int j = 0; j < n; ++j) {
                rbf_diff_all(impl_->spec, impl_->pts[i], impl_->pts[j], all);
                d(i, j) = all[order];
            }
        }
        // D * A^-1, using the symmetry of A.
        slot = std::make_unique<Eigen::MatrixXd>(impl_->lu.solve(d.transpose()).transpose());
    }
    return *slot;
}

std::unique_ptr<LinearOperator> GlobalCollocation::make_operator(
    std::span<const RowSpec> rows, std::array<bool, kDiffOrders> orders) const {
    if ((int)rows.size() != size())
        throw std::invalid_argument("make_operator: one row spec per node required");
    return std::make_unique<DenseOperator>(*this, rows, orders);
}

Eigen::VectorXd GlobalCollocation::derivative(DiffOrder order, const Eigen::VectorXd& nodal) const {
    return nodal_diff_matrix(order) * nodal;
}

std::unique_ptr<FieldEvaluator> GlobalCollocation::interpolant(const Eigen::VectorXd& nodal) const {
    return std::make_unique<GlobalEvaluator>(impl_->spec, impl_->pts, impl_->lu.solve(nodal));
}

double GlobalCollocation::interpolation_condition() const {
    return condition_estimate(impl_->interp);
}

std::unique_ptr<LinearOperator> Collocation::make_operator(std::span<const RowSpec> rows) const {
    std::array<bool, kDiffOrders> orders{};
    for (const RowSpec& r : rows)
        if (r.kind == RowSpec::Kind::Operator)
            for (int g = 0; g < kDiffOrders; ++g)
                if (r.coeff[g] != 0.0) orders[g] = true;
    return make_operator(rows, orders);
}

}  // namespace icerbf
