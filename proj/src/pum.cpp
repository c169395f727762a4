#include "icerbf/pum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef ICERBF_WITH_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/SparseLU>
#endif

namespace icerbf {

double wendland(double r) {
    if (r < 0.0) throw std::invalid_argument("wendland: negative argument");
    if (r >= 1.0) return 0.0;
    double t = 1.0 - r;
    double t2 = t * t;
    return t2 * t2 * (4.0 * r + 1.0);
}

namespace {

// Wendland bump of the scaled distance to a patch center, with derivatives
// in x. g(r) = psi'(r)/r stays bounded at r = 0, which keeps the chain rule
// finite at the center.
void patch_bump(const Patch& patch, double aspect, const Point2& x,
                std::array<double, kDiffOrders>& out) {
    const double rho = patch.radius;
    const double dx = x.x - patch.center.x;
    const double dz = x.z - patch.center.z;
    const double a2 = aspect * aspect;
    const double r = std::sqrt(dx * dx + a2 * dz * dz) / rho;
    out.fill(0.0);
    if (r >= 1.0) return;
    const double t = 1.0 - r;
    const double psi = t * t * t * t * (4.0 * r + 1.0);
    const double g = -20.0 * t * t * t;       // psi'(r)/r
    const double gp = 60.0 * t * t;           // g'(r)
    const double inv2 = 1.0 / (rho * rho);
    out[Val] = psi;
    out[Dx] = g * dx * inv2;
    out[Dz] = g * a2 * dz * inv2;
    if (r > 1e-14) {
        const double inv4r = inv2 * inv2 / r;
        out[Dxx] = gp * dx * dx * inv4r + g * inv2;
        out[Dzz] = gp * a2 * a2 * dz * dz * inv4r + g * a2 * inv2;
        out[Dxz] = gp * a2 * dx * dz * inv4r;
    } else {
        out[Dxx] = g * inv2;
        out[Dzz] = g * a2 * inv2;
        out[Dxz] = 0.0;
    }
}

// Shepard quotient rule: weights w_k = phi_k / sum_i phi_i and their
// derivatives from the per-patch bump derivatives.
void shepard_from_bumps(const std::vector<std::array<double, kDiffOrders>>& phi,
                        std::vector<std::array<double, kDiffOrders>>& w) {
    std::array<double, kDiffOrders> s{};
    for (const auto& f : phi)
        for (int g = 0; g < kDiffOrders; ++g) s[g] += f[g];
    w.resize(phi.size());
    for (size_t k = 0; k < phi.size(); ++k) {
        const auto& f = phi[k];
        auto& o = w[k];
        o[Val] = f[Val] / s[Val];
        o[Dx] = (f[Dx] - o[Val] * s[Dx]) / s[Val];
        o[Dz] = (f[Dz] - o[Val] * s[Dz]) / s[Val];
        o[Dxx] = (f[Dxx] - 2.0 * o[Dx] * s[Dx] - o[Val] * s[Dxx]) / s[Val];
        o[Dzz] = (f[Dzz] - 2.0 * o[Dz] * s[Dz] - o[Val] * s[Dzz]) / s[Val];
        o[Dxz] = (f[Dxz] - o[Dx] * s[Dz] - o[Dz] * s[Dx] - o[Val] * s[Dxz]) / s[Val];
    }
}

// Product-rule expansion of one differentiation order applied to w * v:
// list of (weight-derivative order, kernel order, binomial factor).
struct ProductTerm {
    DiffOrder weight;
    DiffOrder kernel;
    double factor;
};

std::span<const ProductTerm> product_terms(DiffOrder order) {
    static const std::vector<std::vector<ProductTerm>> table = {
        /* Val */ {{Val, Val, 1.0}},
        /* Dx  */ {{Val, Dx, 1.0}, {Dx, Val, 1.0}},
        /* Dz  */ {{Val, Dz, 1.0}, {Dz, Val, 1.0}},
        /* Dxx */ {{Val, Dxx, 1.0}, {Dx, Dx, 2.0}, {Dxx, Val, 1.0}},
        /* Dzz */ {{Val, Dzz, 1.0}, {Dz, Dz, 2.0}, {Dzz, Val, 1.0}},
        /* Dxz */ {{Val, Dxz, 1.0}, {Dx, Dz, 1.0}, {Dz, Dx, 1.0}, {Dxz, Val, 1.0}},
    };
    return table[(int)order];
}

double aniso_dist(const Point2& p, const Point2& q, double a) {
    double dx = p.x - q.x, dz = a * (p.z - q.z);
    return std::sqrt(dx * dx + dz * dz);
}

}  // namespace

double PatchCover::mean_diameter() const {
    double acc = 0.0;
    for (const Patch& p : patches) acc += 2.0 * p.radius;
    return patches.empty() ? 0.0 : acc / patches.size();
}

PatchCover build_cover(const Point2& box_lo, const Point2& box_hi, double aspect,
                       int patches_x, int patches_z, double overlap) {
    if (patches_x < 1 || patches_z < 1)
        throw std::invalid_argument("build_cover: need at least one patch per direction");
    if (!(overlap > 0.0 && overlap < 1.0))
        throw std::invalid_argument("build_cover: overlap must be in (0, 1)");
    const double sx = (box_hi.x - box_lo.x) / patches_x;
    const double sz = (box_hi.z - box_lo.z) / patches_z;
    const double half_diag = 0.5 * std::sqrt(sx * sx + aspect * aspect * sz * sz);
    PatchCover cover;
    cover.aspect = aspect;
    cover.overlap = overlap;
    cover.patches.reserve((size_t)patches_x * patches_z);
    for (int i = 0; i < patches_x; ++i)
        for (int j = 0; j < patches_z; ++j)
            cover.patches.push_back({{box_lo.x + (i + 0.5) * sx, box_lo.z + (j + 0.5) * sz},
                                     (1.0 + overlap) * half_diag});
    return cover;
}

void assign_nodes(PatchCover& cover, std::span<const Point2> pts, int min_nodes) {
    const int n = (int)pts.size();
    min_nodes = std::min(min_nodes, n);

    auto collect = [&](const Patch& p) {
        std::vector<int> m;
        for (int i = 0; i < n; ++i)
            if (aniso_dist(pts[i], p.center, cover.aspect) < p.radius) m.push_back(i);
        return m;
    };

    std::vector<Patch> kept;
    std::vector<std::vector<int>> members;
    for (const Patch& p : cover.patches) {
        std::vector<int> m = collect(p);
        if (m.empty()) continue;  // patch lies outside the ice
        if ((int)m.size() < min_nodes) {
            // Too few nodes to support a second-order local operator: grow
            // the patch to its min_nodes nearest nodes.
            std::vector<double> d(n);
            for (int i = 0; i < n; ++i) d[i] = aniso_dist(pts[i], p.center, cover.aspect);
            std::vector<int> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            std::nth_element(idx.begin(), idx.begin() + (min_nodes - 1), idx.end(),
                             [&](int a, int b) { return d[a] < d[b]; });
            Patch grown = p;
            grown.radius = std::max(p.radius, d[idx[min_nodes - 1]] * (1.0 + 1e-9));
            m = collect(grown);
            kept.push_back(grown);
        } else {
            kept.push_back(p);
        }
        members.push_back(std::move(m));
    }

    cover.patches = std::move(kept);
    cover.members = std::move(members);
    cover.covering.assign(n, {});
    for (int k = 0; k < cover.patch_count(); ++k)
        for (int i : cover.members[k]) cover.covering[i].push_back(k);
    for (int i = 0; i < n; ++i)
        if (cover.covering[i].empty())
            throw std::runtime_error("assign_nodes: node " + std::to_string(i) + " at (" +
                                     std::to_string(pts[i].x) + ", " + std::to_string(pts[i].z) +
                                     ") is not covered by any patch");
}

PatchCover build_cover_for(const NodeSet& nodes, int patches_x, int patches_z, double overlap,
                           int min_nodes) {
    PatchCover cover = build_cover({nodes.x_low, nodes.z_low}, {nodes.x_high, nodes.z_high},
                                   nodes.aspect, patches_x, patches_z, overlap);
    assign_nodes(cover, nodes.pts, min_nodes);
    return cover;
}

PuWeights pu_weights(const PatchCover& cover, const Point2& x) {
    PuWeights result;
    std::vector<std::array<double, kDiffOrders>> bumps;
    for (int k = 0; k < cover.patch_count(); ++k) {
        std::array<double, kDiffOrders> b;
        patch_bump(cover.patches[k], cover.aspect, x, b);
        if (b[Val] > 0.0) {
            result.patch.push_back(k);
            bumps.push_back(b);
        }
    }
    if (result.patch.empty())
        throw std::runtime_error("pu_weights: point (" + std::to_string(x.x) + ", " +
                                 std::to_string(x.z) + ") is not covered by any patch");
    shepard_from_bumps(bumps, result.w);
    return result;
}

// ---------------------------------------------------------------------------
// PumCollocation

namespace {

struct LocalSystem {
    std::vector<int> nodes;            // global node indices
    std::vector<Point2> pts;           // their positions
    std::vector<int> local_of;         // member order (row index per member)
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;  // factorization of the local A
};

#ifdef ICERBF_WITH_UMFPACK
using SparseFactorization = Eigen::UmfPackLU<SpMat>;
#else
using SparseFactorization = Eigen::SparseLU<SpMat>;
#endif

}  // namespace

struct PumCollocation::Impl {
    BasisSpec spec;
    PatchCover cover;
    std::vector<Point2> pts;
    std::vector<LocalSystem> local;
    // Cached Shepard weight derivatives at every node, per covering patch
    // (aligned with cover.covering[i]).
    std::vector<std::vector<std::array<double, kDiffOrders>>> node_weights;
    mutable std::array<std::unique_ptr<SpMat>, kDiffOrders> diff;
    // Patch ids sorted by center x for point lookup.
    std::vector<int> by_x;
    double max_radius = 0.0;

    void ensure_diff(std::array<bool, kDiffOrders> orders) const;
    const SpMat& pattern() const;
    std::vector<int> covering_of_point(const Point2& p) const;
};

PumCollocation::PumCollocation(BasisSpec spec, const NodeSet& nodes, PatchCover cover)
    : impl_(std::make_unique<Impl>()) {
    spec.validate();
    if (cover.covering.size() != nodes.pts.size())
        throw std::invalid_argument("PumCollocation: cover was not assigned to these nodes");
    impl_->spec = spec;
    impl_->cover = std::move(cover);
    impl_->pts = nodes.pts;

    const PatchCover& cv = impl_->cover;
    const int m = cv.patch_count();
    impl_->local.resize(m);
    std::vector<std::string> failures(m);
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < m; ++k) {
        LocalSystem& ls = impl_->local[k];
        ls.nodes = cv.members[k];
        ls.pts.reserve(ls.nodes.size());
        for (int i : ls.nodes) ls.pts.push_back(impl_->pts[i]);
        Eigen::MatrixXd a = interpolation_matrix(spec, ls.pts);
        ls.lu.compute(a);
        if ((ls.lu.matrixLU().diagonal().array() == 0.0).any() ||
            !ls.lu.matrixLU().allFinite())
            failures[k] = "patch " + std::to_string(k) + " has a singular local system (" +
                          std::to_string(ls.nodes.size()) +
                          " nodes); increase the shape parameter or perturb the nodes";
    }
    for (const std::string& f : failures)
        if (!f.empty()) throw std::runtime_error("PumCollocation: " + f);

    const int n = (int)impl_->pts.size();
    impl_->node_weights.resize(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const auto& covering = cv.covering[i];
        std::vector<std::array<double, kDiffOrders>> bumps(covering.size());
        for (size_t c = 0; c < covering.size(); ++c)
            patch_bump(cv.patches[covering[c]], cv.aspect, impl_->pts[i], bumps[c]);
        shepard_from_bumps(bumps, impl_->node_weights[i]);
    }

    impl_->by_x.resize(m);
    std::iota(impl_->by_x.begin(), impl_->by_x.end(), 0);
    std::sort(impl_->by_x.begin(), impl_->by_x.end(), [&](int a, int b) {
        return cv.patches[a].center.x < cv.patches[b].center.x;
    });
    for (const Patch& p : cv.patches) impl_->max_radius = std::max(impl_->max_radius, p.radius);
}

PumCollocation::~PumCollocation() = default;

int PumCollocation::size() const { return (int)impl_->pts.size(); }

const PatchCover& PumCollocation::cover() const { return impl_->cover; }

// Build the sparse nodal differentiation operators for all requested orders
// in one pass: per patch, blend the kernel derivative blocks with the weight
// derivatives (product rule), then push them through the local solve.
void PumCollocation::Impl::ensure_diff(std::array<bool, kDiffOrders> orders) const {
    std::vector<int> todo;
    for (int g = 0; g < kDiffOrders; ++g)
        if (orders[g] && !diff[g]) todo.push_back(g);
    if (todo.empty()) return;

    const int m = cover.patch_count();
    const int n = (int)pts.size();
    using Triplet = Eigen::Triplet<double>;
    std::vector<std::vector<std::vector<Triplet>>> buf(todo.size());
    for (auto& b : buf) b.resize(m);

#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < m; ++k) {
        const LocalSystem& ls = local[k];
        const int nk = (int)ls.nodes.size();

        // Kernel derivative blocks for every order at once.
        std::array<Eigen::MatrixXd, kDiffOrders> kernel;
        for (auto& mat : kernel) mat.resize(nk, nk);
        double all[kDiffOrders];
        for (int r = 0; r < nk; ++r)
            for (int c = 0; c < nk; ++c) {
                rbf_diff_all(spec, ls.pts[r], ls.pts[c], all);
                for (int g = 0; g < kDiffOrders; ++g) kernel[g](r, c) = all[g];
            }

        // Weight derivatives of this patch at its own member nodes.
        std::array<Eigen::VectorXd, kDiffOrders> wd;
        for (auto& v : wd) v.resize(nk);
        for (int r = 0; r < nk; ++r) {
            const int node = ls.nodes[r];
            const auto& covering = cover.covering[node];
            size_t c = std::find(covering.begin(), covering.end(), k) - covering.begin();
            for (int g = 0; g < kDiffOrders; ++g)
                wd[g][r] = node_weights[node][c][g];
        }

        for (size_t t = 0; t < todo.size(); ++t) {
            Eigen::MatrixXd blended = Eigen::MatrixXd::Zero(nk, nk);
            for (const ProductTerm& term : product_terms((DiffOrder)todo[t]))
                blended.noalias() +=
                    term.factor * wd[term.weight].asDiagonal() * kernel[term.kernel];
            // Rows act on nodal values: multiply by A^-1 (A is symmetric).
            Eigen::MatrixXd rows = ls.lu.solve(blended.transpose()).transpose();
            auto& out = buf[t][k];
            out.reserve((size_t)nk * nk);
            for (int r = 0; r < nk; ++r)
                for (int c = 0; c < nk; ++c)
                    out.emplace_back(ls.nodes[r], ls.nodes[c], rows(r, c));
        }
    }

    for (size_t t = 0; t < todo.size(); ++t) {
        std::vector<Triplet> merged;
        size_t total = 0;
        for (const auto& b : buf[t]) total += b.size();
        merged.reserve(total);
        for (const auto& b : buf[t]) merged.insert(merged.end(), b.begin(), b.end());
        auto mat = std::make_unique<SpMat>(n, n);
        mat->setFromTriplets(merged.begin(), merged.end());
        mat->makeCompressed();
        if (!Eigen::Map<const Eigen::VectorXd>(mat->valuePtr(), mat->nonZeros()).allFinite())
            throw std::runtime_error("PumCollocation: non-finite entries in the blended operator; "
                                     "a local system is numerically singular");
        diff[todo[t]] = std::move(mat);
    }
}

const SpMat& PumCollocation::Impl::pattern() const {
    for (const auto& d : diff)
        if (d) return *d;
    std::array<bool, kDiffOrders> want{};
    want[Val] = true;
    ensure_diff(want);
    return *diff[Val];
}

const SpMat& PumCollocation::nodal_diff_matrix(DiffOrder order) const {
    std::array<bool, kDiffOrders> want{};
    want[order] = true;
    impl_->ensure_diff(want);
    return *impl_->diff[order];
}

Eigen::VectorXd PumCollocation::derivative(DiffOrder order, const Eigen::VectorXd& nodal) const {
    return nodal_diff_matrix(order) * nodal;
}

namespace {

/// Sparse system with a fixed pattern tied to the collocation's cached
/// differentiation operators; update() refreshes values in place.
class SparseOperator final : public LinearOperator {
public:
    SparseOperator(const PumCollocation::Impl& impl, std::span<const RowSpec> rows,
                   std::array<bool, kDiffOrders> orders);

    int size() const override { return (int)mat_.rows(); }
    void update(std::span<const RowSpec> rows) override;
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const override { return mat_ * v; }
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) override;
    double nnz_fraction() const override {
        return (double)mat_.nonZeros() / ((double)mat_.rows() * mat_.cols());
    }
    double average_bandwidth() const override;
    Eigen::MatrixXd dense() const override { return Eigen::MatrixXd(mat_); }

private:
    const PumCollocation::Impl& impl_;
    std::vector<int> used_orders_;
    std::vector<RowSpec::Kind> kinds_;
    SpMat mat_;
    // Per system entry: the row it belongs to and the aligned entry in the
    // differentiation pattern (-1 for fixed boundary entries).
    std::vector<int> entry_row_;
    std::vector<int> entry_src_;
    std::vector<double> entry_const_;
    SparseFactorization solver_;
    bool analyzed_ = false;
    bool dirty_ = true;
};

SparseOperator::SparseOperator(const PumCollocation::Impl& impl, std::span<const RowSpec> rows,
                               std::array<bool, kDiffOrders> orders)
    : impl_(impl) {
    impl_.ensure_diff(orders);
    for (int g = 0; g < kDiffOrders; ++g)
        if (orders[g]) used_orders_.push_back(g);
    kinds_.reserve(rows.size());
    for (const RowSpec& r : rows) kinds_.push_back(r.kind);

    const SpMat& pat = impl_.pattern();
    const int n = (int)rows.size();
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trip;
    trip.reserve((size_t)pat.nonZeros());
    for (int j = 0; j < pat.outerSize(); ++j)
        for (SpMat::InnerIterator it(pat, j); it; ++it)
            if (rows[it.row()].kind == RowSpec::Kind::Operator)
                trip.emplace_back((int)it.row(), j, 0.0);
    for (int i = 0; i < n; ++i) {
        if (rows[i].kind == RowSpec::Kind::Unit) {
            trip.emplace_back(i, i, 1.0);
        } else if (rows[i].kind == RowSpec::Kind::Difference) {
            trip.emplace_back(i, i, 1.0);
            trip.emplace_back(i, rows[i].other, -1.0);
        }
    }
    mat_.resize(n, n);
    mat_.setFromTriplets(trip.begin(), trip.end());
    mat_.makeCompressed();

    // Align system entries with the differentiation pattern column by column.
    entry_row_.resize(mat_.nonZeros());
    entry_src_.assign(mat_.nonZeros(), -1);
    entry_const_.assign(mat_.nonZeros(), 0.0);
    for (int j = 0; j < n; ++j) {
        SpMat::InnerIterator pit(pat, j);
        for (SpMat::InnerIterator it(mat_, j); it; ++it) {
            const int i = (int)it.row();
            const auto p = (int)(&it.value() - mat_.valuePtr());
            entry_row_[p] = i;
            if (rows[i].kind == RowSpec::Kind::Operator) {
                while (pit && pit.row() < i) ++pit;
                if (!pit || pit.row() != i)
                    throw std::logic_error("SparseOperator: pattern misalignment");
                entry_src_[p] = (int)(&pit.value() - pat.valuePtr());
                ++pit;
            } else {
                entry_const_[p] = it.value();
            }
        }
    }
    update(rows);
}

void SparseOperator::update(std::span<const RowSpec> rows) {
    if ((int)rows.size() != size())
        throw std::invalid_argument("SparseOperator::update: row count mismatch");
    for (int i = 0; i < size(); ++i) {
        if (rows[i].kind != kinds_[i])
            throw std::invalid_argument("SparseOperator::update: row kinds must not change");
        if (rows[i].kind == RowSpec::Kind::Operator)
            for (int g = 0; g < kDiffOrders; ++g)
                if (rows[i].coeff[g] != 0.0 &&
                    std::find(used_orders_.begin(), used_orders_.end(), g) == used_orders_.end())
                    throw std::invalid_argument(
                        "SparseOperator::update: order not declared at creation");
    }

    std::array<const double*, kDiffOrders> dvals{};
    for (int g : used_orders_) dvals[g] = impl_.diff[g]->valuePtr();
    double* vals = mat_.valuePtr();
    const auto nnz = (std::int64_t)mat_.nonZeros();
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < nnz; ++p) {
        const int src = entry_src_[p];
        if (src < 0) {
            vals[p] = entry_const_[p];
        } else {
            const Coeffs& c = rows[entry_row_[p]].coeff;
            double acc = 0.0;
            for (int g : used_orders_) acc += c[g] * dvals[g][src];
            vals[p] = acc;
        }
    }
    dirty_ = true;
}

Eigen::VectorXd SparseOperator::solve(const Eigen::VectorXd& rhs) {
    if (dirty_) {
        if (!analyzed_) {
            solver_.analyzePattern(mat_);
            analyzed_ = true;
        }
        solver_.factorize(mat_);
        if (solver_.info() != Eigen::Success)
            throw std::runtime_error("SparseOperator: factorization failed");
        dirty_ = false;
    }
    return solver_.solve(rhs);
}

double SparseOperator::average_bandwidth() const {
    const int n = size();
    std::vector<int> lo(n, std::numeric_limits<int>::max()), hi(n, -1);
    for (int j = 0; j < mat_.outerSize(); ++j)
        for (SpMat::InnerIterator it(mat_, j); it; ++it) {
            lo[it.row()] = std::min(lo[it.row()], j);
            hi[it.row()] = std::max(hi[it.row()], j);
        }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += hi[i] >= 0 ? hi[i] - lo[i] + 1 : 0;
    return acc / n;
}

/// Blended local-interpolant evaluator for arbitrary points.
class PumEvaluator final : public FieldEvaluator {
public:
    PumEvaluator(const PumCollocation::Impl& impl, std::vector<Eigen::VectorXd> lambda)
        : impl_(impl), lambda_(std::move(lambda)) {}

    double operator()(const Point2& p, DiffOrder order) const override;

private:
    const PumCollocation::Impl& impl_;
    std::vector<Eigen::VectorXd> lambda_;  // per patch local coefficients
};

double PumEvaluator::operator()(const Point2& p, DiffOrder order) const {
    std::vector<int> covering = impl_.covering_of_point(p);
    std::vector<std::array<double, kDiffOrders>> bumps(covering.size());
    for (size_t c = 0; c < covering.size(); ++c)
        patch_bump(impl_.cover.patches[covering[c]], impl_.cover.aspect, p, bumps[c]);
    std::vector<std::array<double, kDiffOrders>> w;
    shepard_from_bumps(bumps, w);

    double result = 0.0;
    double all[kDiffOrders];
    for (size_t c = 0; c < covering.size(); ++c) {
        const LocalSystem& ls = impl_.local[covering[c]];
        const Eigen::VectorXd& lam = lambda_[covering[c]];
        // Local interpolant derivatives at p for every order the product
        // rule needs.
        std::array<double, kDiffOrders> loc{};
        for (int j = 0; j < (int)ls.pts.size(); ++j) {
            rbf_diff_all(impl_.spec, p, ls.pts[j], all);
            for (int g = 0; g < kDiffOrders; ++g) loc[g] += lam[j] * all[g];
        }
        for (const ProductTerm& term : product_terms(order))
            result += term.factor * w[c][term.weight] * loc[term.kernel];
    }
    return result;
}

}  // namespace

std::vector<int> PumCollocation::Impl::covering_of_point(const Point2& p) const {
    std::vector<int> covering;
    const auto& patches = cover.patches;
    auto lo = std::lower_bound(by_x.begin(), by_x.end(), p.x - max_radius,
                               [&](int k, double v) { return patches[k].center.x < v; });
    auto hi = std::upper_bound(by_x.begin(), by_x.end(), p.x + max_radius,
                               [&](double v, int k) { return v < patches[k].center.x; });
    for (auto it = lo; it != hi; ++it)
        if (aniso_dist(p, patches[*it].center, cover.aspect) < patches[*it].radius)
            covering.push_back(*it);
    std::sort(covering.begin(), covering.end());
    if (!covering.empty()) return covering;

    // Points marginally outside every patch (possible for quadrature points
    // in node-free slivers near the margins): fall back to the relatively
    // nearest patch.
    int best = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int k = 0; k < cover.patch_count(); ++k) {
        double ratio = aniso_dist(p, patches[k].center, cover.aspect) / patches[k].radius;
        if (ratio < best_ratio) {
            best_ratio = ratio;
            best = k;
        }
    }
    return {best};
}

std::unique_ptr<LinearOperator> PumCollocation::make_operator(
    std::span<const RowSpec> rows, std::array<bool, kDiffOrders> orders) const {
    if ((int)rows.size() != size())
        throw std::invalid_argument("make_operator: one row spec per node required");
    return std::make_unique<SparseOperator>(*impl_, rows, orders);
}

std::unique_ptr<FieldEvaluator> PumCollocation::interpolant(const Eigen::VectorXd& nodal) const {
    if (nodal.size() != size())
        throw std::invalid_argument("interpolant: field size mismatch");
    std::vector<Eigen::VectorXd> lambda(impl_->local.size());
    const int m = (int)impl_->local.size();
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < m; ++k) {
        const LocalSystem& ls = impl_->local[k];
        Eigen::VectorXd v((Eigen::Index)ls.nodes.size());
        for (size_t r = 0; r < ls.nodes.size(); ++r) v[(Eigen::Index)r] = nodal[ls.nodes[r]];
        lambda[k] = ls.lu.solve(v);
    }
    return std::make_unique<PumEvaluator>(*impl_, std::move(lambda));
}

double PumCollocation::interpolation_condition() const {
    // Global interpolation matrix reassembled from the local blocks with the
    // partition weights.
    const int n = size();
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trip;
    double all[kDiffOrders];
    for (int k = 0; k < impl_->cover.patch_count(); ++k) {
        const LocalSystem& ls = impl_->local[k];
        for (size_t r = 0; r < ls.nodes.size(); ++r) {
            const int node = ls.nodes[r];
            const auto& covering = impl_->cover.covering[node];
            size_t c = std::find(covering.begin(), covering.end(), k) - covering.begin();
            double w = impl_->node_weights[node][c][Val];
            for (size_t j = 0; j < ls.nodes.size(); ++j) {
                rbf_diff_all(impl_->spec, impl_->pts[node], ls.pts[j], all);
                trip.emplace_back(node, ls.nodes[j], w * all[Val]);
            }
        }
    }
    SpMat weighted(n, n);
    weighted.setFromTriplets(trip.begin(), trip.end());
    weighted.makeCompressed();
    return condition_estimate(weighted);
}

Eigen::MatrixXd assemble_reference(const BasisSpec& spec, const NodeSet& nodes,
                                   const PatchCover& cover, std::span<const RowSpec> rows) {
    const int n = nodes.size();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);

    // Local nodal operators, one patch at a time, straight from the formula.
    for (int k = 0; k < cover.patch_count(); ++k) {
        const auto& mem = cover.members[k];
        const int nk = (int)mem.size();
        std::vector<Point2> pts(nk);
        for (int r = 0; r < nk; ++r) pts[r] = nodes.pts[mem[r]];
        Eigen::MatrixXd a = interpolation_matrix(spec, pts);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);

        std::array<Eigen::MatrixXd, kDiffOrders> psi;
        double all[kDiffOrders];
        for (int g = 0; g < kDiffOrders; ++g) psi[g].resize(nk, nk);
        for (int r = 0; r < nk; ++r)
            for (int c = 0; c < nk; ++c) {
                rbf_diff_all(spec, pts[r], pts[c], all);
                for (int g = 0; g < kDiffOrders; ++g) psi[g](r, c) = all[g];
            }
        for (int g = 0; g < kDiffOrders; ++g)
            psi[g] = lu.solve(psi[g].transpose()).transpose().eval();

        for (int r = 0; r < nk; ++r) {
            const int node = mem[r];
            if (rows[node].kind != RowSpec::Kind::Operator) continue;
            PuWeights w = pu_weights(cover, nodes.pts[node]);
            size_t c = std::find(w.patch.begin(), w.patch.end(), k) - w.patch.begin();
            for (int g = 0; g < kDiffOrders; ++g) {
                if (rows[node].coeff[g] == 0.0) continue;
                for (const ProductTerm& term : product_terms((DiffOrder)g))
                    for (int j = 0; j < nk; ++j)
                        out(node, mem[j]) += rows[node].coeff[g] * term.factor *
                                             w.w[c][term.weight] * psi[term.kernel](r, j);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        if (rows[i].kind == RowSpec::Kind::Unit) {
            out(i, i) = 1.0;
        } else if (rows[i].kind == RowSpec::Kind::Difference) {
            out(i, i) = 1.0;
            out(i, rows[i].other) = -1.0;
        }
    }
    return out;
}

}  // namespace icerbf
