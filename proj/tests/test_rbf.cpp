#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "icerbf/rbf.hpp"

using namespace icerbf;

namespace {

// Independent derivative oracle: second-order central finite differences of
// the plain basis value, with the step scaled to each axis's feature length.
double fd_oracle(const BasisSpec& spec, DiffOrder order, const Point2& x, const Point2& c) {
    auto f = [&](double dx, double dz) {
        return rbf_diff(spec, Val, {x.x + dx, x.z + dz}, c);
    };
    const double lx = 1.0 / spec.epsilon;
    const double lz = 1.0 / (spec.epsilon * spec.aspect);
    const double h1x = 1e-5 * lx, h1z = 1e-5 * lz;   // first derivatives
    const double h2x = 3e-4 * lx, h2z = 3e-4 * lz;   // second derivatives
    switch (order) {
        case Val: return f(0, 0);
        case Dx: return (f(h1x, 0) - f(-h1x, 0)) / (2 * h1x);
        case Dz: return (f(0, h1z) - f(0, -h1z)) / (2 * h1z);
        case Dxx: return (f(h2x, 0) - 2 * f(0, 0) + f(-h2x, 0)) / (h2x * h2x);
        case Dzz: return (f(0, h2z) - 2 * f(0, 0) + f(0, -h2z)) / (h2z * h2z);
        default:
            return (f(h2x, h2z) - f(h2x, -h2z) - f(-h2x, h2z) + f(-h2x, -h2z)) /
                   (4 * h2x * h2z);
    }
}

BasisSpec make_spec(RbfFamily fam, double eps, double aspect) {
    BasisSpec s;
    s.family = fam;
    s.epsilon = eps;
    s.aspect = aspect;
    return s;
}

}  // namespace

TEST_CASE("scaled distance") {
    CHECK(aniso_distance({0, 0}, {3, 4}, 1.0) == doctest::Approx(5.0));
    CHECK(aniso_distance({0, 0}, {1, 1}, 10.0) == doctest::Approx(std::sqrt(101.0)));
    CHECK(aniso_distance({2, 3}, {2, 3}, 7.0) == 0.0);
}

TEST_CASE("scaled distance with unit aspect is Euclidean") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1e4, 1e4);
    for (int i = 0; i < 1000000; ++i) {
        Point2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
        double dx = a.x - b.x, dz = a.z - b.z;
        CHECK(aniso_distance(a, b, 1.0) == std::sqrt(dx * dx + dz * dz));
    }
}

TEST_CASE("basis values at the center") {
    for (RbfFamily fam : {RbfFamily::GA, RbfFamily::MQ, RbfFamily::IMQ, RbfFamily::IQ}) {
        BasisSpec s = make_spec(fam, 0.7, 3.0);
        CHECK(rbf_diff(s, Val, {1, 2}, {1, 2}) == doctest::Approx(1.0));
        CHECK(rbf_diff(s, Dx, {1, 2}, {1, 2}) == doctest::Approx(0.0));
        CHECK(rbf_diff(s, Dz, {1, 2}, {1, 2}) == doctest::Approx(0.0));
    }
}

TEST_CASE("gaussian second derivative closed form") {
    BasisSpec s = make_spec(RbfFamily::GA, 1.0, 1.0);
    CHECK(rbf_diff(s, Dxx, {1, 0}, {0, 0}) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("all families and orders match finite differences") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (RbfFamily fam : {RbfFamily::GA, RbfFamily::MQ, RbfFamily::IMQ, RbfFamily::IQ}) {
        for (double aspect : {1.0, 4.0, 25.0}) {
            BasisSpec s = make_spec(fam, 0.8, aspect);
            for (DiffOrder order : {Dx, Dz, Dxx, Dzz, Dxz}) {
                std::vector<double> fd(40), an(40);
                double scale = 0.0;
                for (int trial = 0; trial < 40; ++trial) {
                    Point2 c{u(rng), u(rng)};
                    Point2 x{c.x + u(rng), c.z + u(rng) / aspect};
                    fd[trial] = fd_oracle(s, order, x, c);
                    an[trial] = rbf_diff(s, order, x, c);
                    scale = std::max(scale, std::abs(fd[trial]));
                }
                for (int trial = 0; trial < 40; ++trial)
                    CHECK(std::abs(an[trial] - fd[trial]) < 1e-5 * scale);
            }
        }
    }
}

TEST_CASE("value is symmetric, gradient antisymmetric under point exchange") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    BasisSpec s = make_spec(RbfFamily::GA, 0.6, 5.0);
    for (int i = 0; i < 200; ++i) {
        Point2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
        CHECK(rbf_diff(s, Val, a, b) == doctest::Approx(rbf_diff(s, Val, b, a)));
        CHECK(rbf_diff(s, Dx, a, b) == doctest::Approx(-rbf_diff(s, Dx, b, a)));
        CHECK(rbf_diff(s, Dz, a, b) == doctest::Approx(-rbf_diff(s, Dz, b, a)));
    }
}

TEST_CASE("interpolation matrix basics") {
    BasisSpec s = make_spec(RbfFamily::GA, 0.9, 2.0);
    std::vector<Point2> single{{0.3, 0.4}};
    Eigen::MatrixXd one = interpolation_matrix(s, single);
    CHECK(one.rows() == 1);
    CHECK(one(0, 0) == doctest::Approx(1.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts;
    for (int i = 0; i < 40; ++i) pts.push_back({u(rng), u(rng)});
    Eigen::MatrixXd a = interpolation_matrix(s, pts);
    CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);

    std::vector<Point2> dup{{0.1, 0.2}, {0.1, 0.2}};
    CHECK_THROWS_AS(interpolation_matrix(s, dup), std::invalid_argument);
}

TEST_CASE("interpolant reproduces nodal data") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts;
    for (int i = 0; i < 60; ++i) pts.push_back({u(rng), u(rng)});
    BasisSpec s = make_spec(RbfFamily::GA, 3.0, 1.0);
    Eigen::MatrixXd a = interpolation_matrix(s, pts);
    Eigen::VectorXd v(60);
    for (int i = 0; i < 60; ++i) v[i] = std::sin(3 * pts[i].x) + pts[i].z;
    Eigen::VectorXd lambda = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(v);
    double cond = condition_estimate(a);
    for (int i = 0; i < 60; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 60; ++j) acc += lambda[j] * rbf_diff(s, Val, pts[i], pts[j]);
        CHECK(std::abs(acc - v[i]) < 1e-15 * cond + 1e-12);
    }
}

TEST_CASE("positive definite families have positive eigenvalues") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts;
    for (int i = 0; i < 25; ++i) pts.push_back({u(rng), 0.1 * u(rng)});
    for (RbfFamily fam : {RbfFamily::GA, RbfFamily::IMQ, RbfFamily::IQ}) {
        BasisSpec s = make_spec(fam, 4.0, 10.0);
        Eigen::MatrixXd a = interpolation_matrix(s, pts);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("condition estimate on known matrices") {
    CHECK(condition_estimate(Eigen::MatrixXd::Identity(10, 10)) == doctest::Approx(1.0));

    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 2.0;
    d(1, 1) = 0.5;
    CHECK(condition_estimate(d) == doctest::Approx(4.0));

    CHECK(std::isinf(condition_estimate(Eigen::MatrixXd::Zero(4, 4))));
}

TEST_CASE("condition estimate against the explicit inverse") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd m(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) m(i, j) = g(rng);
        double exact = m.cwiseAbs().colwise().sum().maxCoeff() *
                       m.inverse().cwiseAbs().colwise().sum().maxCoeff();
        double est = condition_estimate(m);
        CHECK(est <= exact * (1.0 + 1e-10));
        CHECK(est >= exact / 3.0);
    }
}

TEST_CASE("sparse condition estimate matches dense on a small system") {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(30, 30);
    for (int i = 0; i < 30; ++i) {
        m(i, i) = 4.0 + g(rng);
        if (i > 0) m(i, i - 1) = g(rng);
        if (i + 1 < 30) m(i, i + 1) = g(rng);
    }
    SpMat sp = m.sparseView();
    double dense_est = condition_estimate(m);
    double sparse_est = condition_estimate(sp);
    CHECK(sparse_est == doctest::Approx(dense_est).epsilon(1e-10));
}

TEST_CASE("shape constant tuning hits a reachable target") {
    // Synthetic monotone probe: cond(C) = 10^(18 - 4 log10(C/0.01)).
    CondProbe probe = [](double c) { return std::pow(10.0, 18.0 - 4.0 * std::log10(c / 0.01)); };
    std::vector<CondProbe> probes{probe, probe};
    TuneResult r = tune_shape_constant(probes, 1e16);
    CHECK(!r.warning);
    CHECK(r.per_set.size() == 2);
    for (double cond : r.conditions) {
        CHECK(cond < 1e17);
        CHECK(cond > 1e15);
    }
    CHECK(r.shape_constant == doctest::Approx(r.per_set[0]).epsilon(1e-6));
}

TEST_CASE("unreachable condition target returns a bound with a warning") {
    CondProbe probe = [](double c) { return std::pow(10.0, 18.0 - 4.0 * std::log10(c / 0.01)); };
    std::vector<CondProbe> probes{probe};
    TuneResult r = tune_shape_constant(probes, 1.0);
    CHECK(r.warning);
    CHECK((r.per_set[0] == doctest::Approx(10.0) || r.per_set[0] == doctest::Approx(1e-3)));
}
