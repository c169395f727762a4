#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "icerbf/geometry.hpp"

using namespace icerbf;

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kAlpha = 0.5 * kPi / 180.0;
}  // namespace

TEST_CASE("inclined slab surface and bed") {
    DomainProfile p = ismip_b_profile();
    CHECK(p.lateral_bc == LateralBc::Periodic);
    CHECK(p.surface(0.0) == doctest::Approx(0.0));
    CHECK(p.bed(0.0) == doctest::Approx(-1000.0));
    // quarter wavelength: sin = 1
    CHECK(p.bed(2500.0) == doctest::Approx(-2500.0 * std::tan(kAlpha) - 500.0).epsilon(1e-12));
    CHECK(p.surface_slope(4321.0) == doctest::Approx(-std::tan(kAlpha)));
    CHECK_THROWS_AS(ismip_b_profile(-10.0), std::invalid_argument);
}

TEST_CASE("inclined slab thickness stays within the sinusoid band") {
    DomainProfile p = ismip_b_profile();
    for (int i = 0; i <= 5000; ++i) {
        double x = p.length * i / 5000.0;
        double t = p.thickness(x);
        CHECK(t >= 500.0 - 1e-9);
        CHECK(t <= 1500.0 + 1e-9);
        CHECK(t == doctest::Approx(1000.0 - 500.0 * std::sin(2.0 * kPi * x / p.length))
                       .epsilon(1e-12));
    }
    CHECK(p.max_thickness == doctest::Approx(1500.0).epsilon(1e-9));
}

TEST_CASE("ice cap height, symmetry, and margins") {
    DomainProfile p = ice_cap_profile();
    CHECK(p.lateral_bc == LateralBc::Symmetric);
    CHECK(p.surface(100e3) == doctest::Approx(10.0));
    CHECK(p.surface(750e3) == doctest::Approx(3500.0).epsilon(1e-12));
    CHECK(p.bed(512e3) == 0.0);

    for (double d : {1e3, 75e3, 200e3, 449e3, 600e3}) {
        CHECK(p.surface(750e3 - d) == doctest::Approx(p.surface(750e3 + d)).epsilon(1e-12));
    }

    // Continuity at the margins: the dome hands over to the thin layer.
    for (double xm : {300e3, 1200e3}) {
        CHECK(std::abs(p.surface(xm) - 10.0) < 1e-8);
        CHECK(std::abs(p.surface(xm - 1e-3) - p.surface(xm + 1e-3)) < 1e-6);
    }
    CHECK(p.z_high == doctest::Approx(3500.0).epsilon(1e-9));
    CHECK(p.z_low == 0.0);

    CHECK_THROWS_AS(ice_cap_profile(1.5e6, Interval{-1.0, 1.2e6}), std::invalid_argument);
    CHECK_THROWS_AS(ice_cap_profile(1.5e6, Interval{3e5, 2e6}), std::invalid_argument);
}

TEST_CASE("surface slope matches centered differences") {
    // 0.1 m step, sampled away from the margin kinks where the finite
    // difference itself is inaccurate.
    DomainProfile cap = ice_cap_profile();
    const double step = 0.1;
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        double x = 310e3 + (1190e3 - 310e3) * i / 999.0;
        double fd = (cap.surface(x + step) - cap.surface(x - step)) / (2.0 * step);
        double an = cap.surface_slope(x);
        if (std::abs(an) < 1e-12) continue;  // dome center
        CHECK(std::abs(fd - an) / std::abs(an) < 1e-4);
        ++checked;
    }
    CHECK(checked >= 990);

    DomainProfile slab = ismip_b_profile();
    for (int i = 0; i < 1000; ++i) {
        double x = 1.0 + (slab.length - 2.0) * i / 999.0;
        double fd = (slab.surface(x + step) - slab.surface(x - step)) / (2.0 * step);
        CHECK(std::abs(fd - slab.surface_slope(x)) / std::abs(slab.surface_slope(x)) < 1e-4);
    }
}

TEST_CASE("ice cap slope is zero on the thin shelf and finite inside") {
    DomainProfile p = ice_cap_profile();
    CHECK(p.surface_slope(50e3) == 0.0);
    CHECK(p.surface_slope(1400e3) == 0.0);
    CHECK(std::isfinite(p.surface_slope(300.001e3)));
    CHECK(std::isfinite(p.surface_slope(1199.999e3)));
    // Slope magnitude grows toward the margin but stays bounded where the
    // dome is thicker than the shelf.
    double inner = std::abs(p.surface_slope(700e3));
    double outer = std::abs(p.surface_slope(310e3));
    CHECK(outer > inner);
    CHECK(outer < 10.0);
}
