#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "icerbf/pum.hpp"

using namespace icerbf;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Setup {
    NodeSet nodes;
    PatchCover cover;
};

Setup unit_square(int n, int px, int pz, double overlap = 0.25) {
    Setup s;
    s.nodes = cartesian_nodes(slab_profile(1.0, 1.0), n, n);
    s.cover = build_cover_for(s.nodes, px, pz, overlap);
    return s;
}

double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST_CASE("wendland bump values") {
    CHECK(wendland(0.0) == doctest::Approx(1.0));
    CHECK(wendland(1.0) == doctest::Approx(0.0));
    CHECK(wendland(0.5) == doctest::Approx(0.1875));
    CHECK(wendland(2.0) == 0.0);
    CHECK_THROWS_AS(wendland(-0.1), std::invalid_argument);
}

TEST_CASE("wendland bump is C2 at the support boundary") {
    const double h = 1e-7;
    CHECK(std::abs(wendland(1.0 - h)) < 1e-12);
    CHECK(std::abs((wendland(1.0 - h) - wendland(1.0 - 2 * h)) / h) < 1e-9);
}

TEST_CASE("single patch covers everything with unit weight") {
    Setup s = unit_square(8, 1, 1);
    CHECK(s.cover.patch_count() == 1);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        PuWeights w = pu_weights(s.cover, {u(rng), u(rng)});
        REQUIRE(w.patch.size() == 1);
        CHECK(w.w[0][Val] == doctest::Approx(1.0));
        for (DiffOrder g : {Dx, Dz, Dxx, Dzz, Dxz}) CHECK(w.w[0][g] == 0.0);
    }
}

TEST_CASE("two symmetric patches split the midpoint evenly") {
    PatchCover cover = build_cover({0, 0}, {1, 1}, 1.0, 2, 1, 0.3);
    std::vector<Point2> pts{{0.5, 0.5}, {0.25, 0.5}, {0.75, 0.5}};
    assign_nodes(cover, pts, 1);
    PuWeights w = pu_weights(cover, {0.5, 0.5});
    REQUIRE(w.patch.size() == 2);
    CHECK(w.w[0][Val] == doctest::Approx(0.5));
    CHECK(w.w[1][Val] == doctest::Approx(0.5));
}

TEST_CASE("weights sum to one and derivative sums vanish") {
    Setup s = unit_square(15, 3, 2);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double scale = 0.0;
    for (const Patch& p : s.cover.patches) scale = std::max(scale, 1.0 / p.radius);
    for (int i = 0; i < 10000; ++i) {
        Point2 x{u(rng), u(rng)};
        PuWeights w = pu_weights(s.cover, x);
        double sum = 0.0, sum_dx = 0.0, sum_dz = 0.0, sum_dxx = 0.0;
        for (const auto& wk : w.w) {
            sum += wk[Val];
            sum_dx += wk[Dx];
            sum_dz += wk[Dz];
            sum_dxx += wk[Dxx];
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
        CHECK(std::abs(sum_dx) < 1e-8 * scale);
        CHECK(std::abs(sum_dz) < 1e-8 * scale);
        CHECK(std::abs(sum_dxx) < 1e-6 * scale * scale);
    }
}

TEST_CASE("every node of a cover sums its weights to one") {
    for (auto [n, px, pz] : {std::tuple{10, 2, 2}, {18, 4, 3}, {25, 5, 5}}) {
        Setup s = unit_square(n, px, pz);
        for (const Point2& p : s.nodes.pts) {
            PuWeights w = pu_weights(s.cover, p);
            double sum = 0.0;
            for (const auto& wk : w.w) sum += wk[Val];
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("uncovered nodes are reported with their location") {
    PatchCover cover = build_cover({0, 0}, {1, 1}, 1.0, 2, 2, 0.25);
    for (Patch& p : cover.patches) p.radius *= 0.3;
    std::vector<Point2> pts{{0.5, 0.5}, {0.01, 0.99}};
    CHECK_THROWS_WITH_AS(assign_nodes(cover, pts, 1),
                         doctest::Contains("not covered"), std::runtime_error);
}

TEST_CASE("empty or tiny patches are repaired") {
    // Nodes concentrated in the left half: right-hand patches lose their
    // nodes and must be dropped or grown.
    PatchCover cover = build_cover({0, 0}, {1, 1}, 1.0, 4, 1, 0.25);
    std::vector<Point2> pts;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 60; ++i) pts.push_back({0.5 * u(rng), u(rng)});
    pts.push_back({0.95, 0.5});
    assign_nodes(cover, pts, 6);
    for (const auto& m : cover.members) CHECK(m.size() >= 6);
    for (const auto& c : cover.covering) CHECK(!c.empty());
}

TEST_CASE("identity operator reproduces nodal vectors") {
    Setup s = unit_square(14, 3, 3);
    BasisSpec spec = make_basis(RbfFamily::GA, 0.7, s.nodes);
    PumCollocation colloc(spec, s.nodes, s.cover);
    std::vector<RowSpec> rows(s.nodes.size());
    Coeffs ident{};
    ident[Val] = 1.0;
    for (auto& r : rows) r = RowSpec::op(ident);
    auto op = colloc.make_operator(rows);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd v(s.nodes.size());
    for (int i = 0; i < v.size(); ++i) v[i] = g(rng);
    CHECK((op->apply(v) - v).lpNorm<Eigen::Infinity>() < 1e-8 * v.lpNorm<Eigen::Infinity>());
}

TEST_CASE("x-derivative of the coordinate field is one") {
    // Flat-basis regime: near-polynomial behavior reproduces linears.
    Setup s = unit_square(16, 4, 4);
    BasisSpec spec = make_basis(RbfFamily::MQ, 0.035, s.nodes);
    PumCollocation colloc(spec, s.nodes, s.cover);
    Eigen::VectorXd xs(s.nodes.size());
    for (int i = 0; i < xs.size(); ++i) xs[i] = s.nodes.pts[i].x;
    Eigen::VectorXd d = colloc.derivative(Dx, xs);
    CHECK((d.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("single-patch blended operator equals the global one") {
    Setup s = unit_square(12, 1, 1);
    BasisSpec spec = make_basis(RbfFamily::GA, 0.8, s.nodes);
    PumCollocation pum(spec, s.nodes, s.cover);
    GlobalCollocation global(spec, s.nodes);

    std::vector<RowSpec> rows(s.nodes.size());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < s.nodes.size(); ++i) {
        if (i % 7 == 0) {
            rows[i] = RowSpec::unit();
        } else {
            Coeffs c{};
            for (int k = 0; k < kDiffOrders; ++k) c[k] = g(rng);
            rows[i] = RowSpec::op(c);
        }
    }
    auto a = pum.make_operator(rows);
    auto b = global.make_operator(rows);
    CHECK(max_rel_diff(a->dense(), b->dense()) < 1e-12);
}

TEST_CASE("production assembler matches the serial reference") {
    Setup s = unit_square(13, 3, 2);
    BasisSpec spec = make_basis(RbfFamily::GA, 0.7, s.nodes);
    PumCollocation colloc(spec, s.nodes, s.cover);

    std::vector<RowSpec> rows(s.nodes.size());
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < s.nodes.size(); ++i) {
        if (i % 11 == 3) {
            rows[i] = RowSpec::unit();
        } else if (i % 11 == 7) {
            rows[i] = RowSpec::difference((i + 5) % s.nodes.size());
        } else {
            Coeffs c{};
            for (int k = 0; k < kDiffOrders; ++k) c[k] = g(rng);
            rows[i] = RowSpec::op(c);
        }
    }
    auto op = colloc.make_operator(rows);
    Eigen::MatrixXd reference = assemble_reference(spec, s.nodes, s.cover, rows);
    CHECK(max_rel_diff(op->dense(), reference) < 1e-12);

    //

    // Refreshing with new coefficients must match a fresh reference build.
    for (auto& r : rows)
        if (r.kind == RowSpec::Kind::Operator)
            for (int k = 0; k < kDiffOrders; ++k) r.coeff[k] = g(rng);
    op->update(rows);
    reference = assemble_reference(spec, s.nodes, s.cover, rows);
    CHECK(max_rel_diff(op->dense(), reference) < 1e-12);
}

TEST_CASE("nonzeros per row stay bounded under joint refinement") {
    std::vector<double> nnz_per_row, fill;
    for (auto [n, p] : {std::pair{29, 4}, {57, 8}, {113, 16}}) {
        Setup s = unit_square(n, p, p);
        BasisSpec spec = make_basis(RbfFamily::GA, 0.7, s.nodes);
        PumCollocation colloc(spec, s.nodes, s.cover);
        const SpMat& d = colloc.nodal_diff_matrix(Dx);
        nnz_per_row.push_back((double)d.nonZeros() / s.nodes.size());
        fill.push_back((double)d.nonZeros() / ((double)s.nodes.size() * s.nodes.size()));
    }
    // Per-row count saturates toward a constant across the 4x step...
    CHECK(nnz_per_row[2] < 1.15 * nnz_per_row[1]);
    // ...while the fill fraction keeps dropping.
    CHECK(fill[1] < fill[0]);
    CHECK(fill[2] < fill[1]);
}

TEST_CASE("manufactured Poisson solution converges under joint refinement") {
    auto exact = [](const Point2& p) { return std::sin(4 * kPi * p.x) * std::sin(4 * kPi * p.z); };
    std::vector<double> errors;
    for (auto [n, p] : {std::tuple{9, 1}, {17, 2}, {33, 4}, {65, 8}}) {
        Setup s = unit_square(n, p, p);
        BasisSpec spec = make_basis(RbfFamily::GA, 0.15, s.nodes);
        PumCollocation colloc(spec, s.nodes, s.cover);
        const int nn = s.nodes.size();
        std::vector<RowSpec> rows(nn);
        Eigen::VectorXd rhs(nn);
        for (int i = 0; i < nn; ++i) {
            const Point2 pt = s.nodes.pts[i];
            if (s.nodes.tags[i] == NodeTag::Interior) {
                Coeffs c{};
                c[Dxx] = 1.0;
                c[Dzz] = 1.0;
                rows[i] = RowSpec::op(c);
                rhs[i] = -32.0 * kPi * kPi * exact(pt);
            } else {
                rows[i] = RowSpec::unit();
                rhs[i] = exact(pt);
            }
        }
        auto op = colloc.make_operator(rows);
        Eigen::VectorXd u = op->solve(rhs);
        double rms = 0.0;
        for (int i = 0; i < nn; ++i) {
            double d = u[i] - exact(s.nodes.pts[i]);
            rms += d * d;
        }
        errors.push_back(std::sqrt(rms / nn));
    }
    for (size_t l = 1; l < errors.size(); ++l) CHECK(errors[l] < errors[l - 1]);
}

TEST_CASE("interpolant evaluation matches nodal data and derivatives") {
    Setup s = unit_square(18, 3, 3);
    BasisSpec spec = make_basis(RbfFamily::GA, 0.2, s.nodes);
    PumCollocation colloc(spec, s.nodes, s.cover);
    auto f = [](const Point2& p) { return 0.3 * p.x * p.x + 0.7 * p.z - 0.2 * p.x * p.z; };
    Eigen::VectorXd v(s.nodes.size());
    for (int i = 0; i < v.size(); ++i) v[i] = f(s.nodes.pts[i]);
    auto interp = colloc.interpolant(v);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (int t = 0; t < 50; ++t) {
        Point2 p{u(rng), u(rng)};
        CHECK((*interp)(p, Val) == doctest::Approx(f(p)).epsilon(1e-4));
        CHECK((*interp)(p, Dx) == doctest::Approx(0.6 * p.x - 0.2 * p.z).epsilon(1e-3));
        CHECK((*interp)(p, Dz) == doctest::Approx(0.7 - 0.2 * p.x).epsilon(1e-3));
    }
}
