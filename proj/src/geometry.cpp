#include "icerbf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace icerbf {

namespace {

// Scan [0, L] for the vertical bounding box and the maximum thickness.
// The profiles are smooth except at isolated margin points, so a dense
// scan with local ternary refinement is accurate well below 1e-9 * L_z.
void compute_vertical_bounds(DomainProfile& p, int samples = 20001) {
    auto refine = [&](std::function<double(double)> f, double x, double step, bool maximize) {
        double lo = std::max(0.0, x - step);
        double hi = std::min(p.length, x + step);
        for (int it = 0; it < 200; ++it) {
            double m1 = lo + (hi - lo) / 3.0;
            double m2 = hi - (hi - lo) / 3.0;
            bool keep_left = maximize ? (f(m1) > f(m2)) : (f(m1) < f(m2));
            if (keep_left)
                hi = m2;
            else
                lo = m1;
        }
        return f(0.5 * (lo + hi));
    };

    double step = p.length / (samples - 1);
    double zmax = -1e300, zmin = 1e300, hmax = 0.0;
    double x_zmax = 0, x_zmin = 0, x_hmax = 0;
    for (int i = 0; i < samples; ++i) {
        double x = i * step;
        double s = p.surface(x), b = p.bed(x);
        if (s > zmax) { zmax = s; x_zmax = x; }
        if (b < zmin) { zmin = b; x_zmin = x; }
        if (s - b > hmax) { hmax = s - b; x_hmax = x; }
    }
    p.z_high = refine(p.surface, x_zmax, step, true);
    p.z_low = refine(p.bed, x_zmin, step, false);
    auto thick = [&](double x) { return p.surface(x) - p.bed(x); };
    p.max_thickness = refine(thick, x_hmax, step, true);
}

}  // namespace

DomainProfile ismip_b_profile(double length, double alpha_rad) {
    if (!(length > 0.0)) throw std::invalid_argument("ismip_b_profile: length must be positive");
    const double slope = -std::tan(alpha_rad);
    const double two_pi_over_L = 2.0 * 3.14159265358979323846 / length;

    DomainProfile p;
    p.name = "ismip-b";
    p.length = length;
    p.lateral_bc = LateralBc::Periodic;
    p.surface = [slope](double x) { return slope * x; };
    p.bed = [slope, two_pi_over_L](double x) {
        return slope * x - 1000.0 + 500.0 * std::sin(two_pi_over_L * x);
    };
    p.surface_slope = [slope](double) { return slope; };
    p.min_thickness = 500.0;
    compute_vertical_bounds(p);
    return p;
}

DomainProfile ice_cap_profile(double span, Interval cap, double max_height,
                              double min_thickness) {
    if (!(span > 0.0)) throw std::invalid_argument("ice_cap_profile: span must be positive");
    if (cap.lo < 0.0 || cap.hi > span || cap.lo >= cap.hi)
        throw std::invalid_argument("ice_cap_profile: cap extent must lie inside [0, span]");
    if (!(max_height > min_thickness) || !(min_thickness > 0.0))
        throw std::invalid_argument("ice_cap_profile: need max_height > min_thickness > 0");

    const double xc = 0.5 * (cap.lo + cap.hi);  // dome center
    const double R = 0.5 * cap.length();        // dome radius
    const double n = 3.0;                       // flow-law exponent of the steady dome
    const double m = n / (2.0 * n + 2.0);
    const double pre = std::pow(1.0 - 1.0 / n, -m);
    // Width (in thickness) of the C2 blend between the dome and the thin
    // layer. The raw dome meets the layer with an unbounded slope; the blend
    // keeps the surface gradient finite at the margins.
    const double blend = std::min(150.0, 0.2 * (max_height - min_thickness));

    // Steady-dome thickness as a function of the normalized distance s from
    // the center; zero outside s = 1.
    auto dome = [=](double s) -> double {
        if (s >= 1.0) return 0.0;
        double bracket = (1.0 + 1.0 / n) * s - 1.0 / n + std::pow(1.0 - s, 1.0 + 1.0 / n) -
                         std::pow(s, 1.0 + 1.0 / n);
        if (bracket <= 0.0) return 0.0;
        return max_height * pre * std::pow(bracket, m);
    };
    auto dome_slope = [=](double x) -> double {
        double s = std::abs(x - xc) / R;
        if (s >= 1.0 || s <= 0.0) return 0.0;
        double bracket = (1.0 + 1.0 / n) * s - 1.0 / n + std::pow(1.0 - s, 1.0 + 1.0 / n) -
                         std::pow(s, 1.0 + 1.0 / n);
        if (bracket <= 0.0) return 0.0;
        double dbracket =
            (1.0 + 1.0 / n) * (1.0 - std::pow(1.0 - s, 1.0 / n) - std::pow(s, 1.0 / n));
        double dh_ds = max_height * pre * m * std::pow(bracket, m - 1.0) * dbracket;
        return dh_ds * ((x > xc) ? 1.0 : -1.0) / R;
    };
    // C2 ramp: zero with two flat derivatives at u = 0, identity slope at
    // u = 1, so the surface is C2 across both ends of the blend zone.
    auto ramp = [](double u) { return u * u * u * (6.0 - 8.0 * u + 3.0 * u * u); };
    auto ramp_d = [](double u) { return u * u * (18.0 - 32.0 * u + 15.0 * u * u); };

    DomainProfile p;
    p.name = "ice-cap";
    p.length = span;
    p.lateral_bc = LateralBc::Symmetric;
    p.min_thickness = min_thickness;
    p.cap_extent = cap;
    p.bed = [](double) { return 0.0; };
    p.surface = [=](double x) {
        double t = dome(std::abs(x - xc) / R) - min_thickness;
        if (t <= 0.0) return min_thickness;
        if (t >= blend) return min_thickness + t;
        return min_thickness + blend * ramp(t / blend);
    };
    p.surface_slope = [=](double x) {
        double t = dome(std::abs(x - xc) / R) - min_thickness;
        if (t <= 0.0) return 0.0;
        if (t >= blend) return dome_slope(x);
        return ramp_d(t / blend) * dome_slope(x);
    };
    compute_vertical_bounds(p);
    return p;
}

DomainProfile slab_profile(double length, double thickness) {
    if (!(length > 0.0) || !(thickness > 0.0))
        throw std::invalid_argument("slab_profile: length and thickness must be positive");
    DomainProfile p;
    p.name = "slab";
    p.length = length;
    p.lateral_bc = LateralBc::Symmetric;
    p.min_thickness = thickness;
    p.surface = [thickness](double) { return thickness; };
    p.bed = [](double) { return 0.0; };
    p.surface_slope = [](double) { return 0.0; };
    p.z_low = 0.0;
    p.z_high = thickness;
    p.max_thickness = thickness;
    return p;
}

}  // namespace icerbf
