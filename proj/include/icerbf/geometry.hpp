#pragma once

#include <functional>
#include <optional>
#include <string>

namespace icerbf {

/// Lateral boundary treatment of a flow-line domain.
enum class LateralBc { Periodic, Symmetric };

/// Closed x-interval, in meters.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
};

/// A flow-line domain: surface and bed elevation as functions of x,
/// plus the metadata the node generator and solver need.
///
/// Profiles are immutable after construction and all evaluators are pure,
/// so they can be shared freely across threads.
struct DomainProfile {
    std::string name;
    double length = 0.0;         // horizontal extent L_x [m]
    double min_thickness = 0.0;  // [m]
    LateralBc lateral_bc = LateralBc::Symmetric;

    std::function<double(double)> surface;        // [m]
    std::function<double(double)> bed;            // [m]
    std::function<double(double)> surface_slope;  // d(surface)/dx, dimensionless

    /// Top-boundary segment that should get clustered (Chebyshev) nodes,
    /// if the geometry has a steep-margin cap.
    std::optional<Interval> cap_extent;

    // Vertical bounding box of the ice body and the largest surface-bed gap,
    // computed at construction time.
    double z_low = 0.0;
    double z_high = 0.0;
    double max_thickness = 0.0;

    double vertical_extent() const { return z_high - z_low; }
    double thickness(double x) const { return surface(x) - bed(x); }
};

/// Inclined slab on a sinusoidal bed with periodic lateral boundaries.
/// Defaults reproduce the standard 10 km configuration with a 0.5 degree slope.
DomainProfile ismip_b_profile(double length = 10000.0,
                              double alpha_rad = 0.5 * 3.14159265358979323846 / 180.0);

/// Continental-scale ice cap: flat bed, steady-state dome profile over
/// [cap.lo, cap.hi] and a thin ice layer elsewhere. Symmetric lateral BCs.
DomainProfile ice_cap_profile(double span = 1.5e6,
                              Interval cap = {3.0e5, 1.2e6},
                              double max_height = 3500.0,
                              double min_thickness = 10.0);

/// Rectangular slab of constant thickness. Degenerate geometry used by the
/// test suites; symmetric lateral boundaries.
DomainProfile slab_profile(double length, double thickness);

}  // namespace icerbf
