#pragma once

#include <cstdint>
#include <vector>

#include "icerbf/geometry.hpp"

namespace icerbf {

struct Point2 {
    double x = 0.0;
    double z = 0.0;
};

enum class NodeTag : std::uint8_t { Interior, Base, Surface, LeftLateral, RightLateral };

struct TaggedNode {
    Point2 p;
    NodeTag tag;
};

/// Collocation node set over a DomainProfile. Interior nodes come first,
/// then boundary nodes in base / surface / left / right order. Immutable
/// after generation; generation itself is deterministic.
struct NodeSet {
    std::vector<Point2> pts;
    std::vector<NodeTag> tags;

    double h_x = 0.0;    // nominal grid spacing in x [m]
    double h_z = 0.0;    // nominal grid spacing in z [m]
    double aspect = 1.0; // h_x / h_z

    // Bounding box of the generating grid (for covers and refinement).
    double x_low = 0.0;
    double x_high = 0.0;
    double z_low = 0.0;
    double z_high = 0.0;

    // Matched lateral node pairs (same index into `left` and `right`) for
    // periodic domains; empty otherwise.
    std::vector<int> periodic_left;
    std::vector<int> periodic_right;

    int size() const { return static_cast<int>(pts.size()); }
    /// Internodal distance of the generating grid in the scaled norm.
    double internodal_distance() const;
    int count(NodeTag t) const;
};

/// Value of the d-th Halton sequence element for the given base
/// (radical inverse), d starting at 1.
double halton(std::uint64_t index, unsigned base);

/// Chebyshev-Lobatto abscissae (n points, endpoints included) on [lo, hi],
/// returned in ascending order.
std::vector<double> chebyshev_points(double lo, double hi, int n);

/// Boundary discretization: equidistant nodes on the base and the top
/// surface, with the top cap segment (if the profile has one and the flag is
/// set) using Chebyshev clustering; lateral columns on x = 0 and x = length
/// with spacing close to h_z. Duplicate corner nodes are merged with tag
/// precedence Base > Lateral > Surface.
std::vector<TaggedNode> boundary_nodes(const DomainProfile& profile, int n_x, int n_z,
                                       bool chebyshev_on_cap);

/// Background Cartesian grid clipped to the profile plus boundary nodes;
/// interior nodes closer than h/4 (scaled norm) to a boundary node removed.
NodeSet cartesian_nodes(const DomainProfile& profile, int n_x, int n_z);

/// Same pipeline with a quasi-random Halton background set (bases 2 and 3).
NodeSet halton_nodes(const DomainProfile& profile, int n_x, int n_z);

/// Node positions as CSV rows "x,z,tag" with full decimal precision.
void write_nodes_csv(const NodeSet& nodes, const std::string& path);

}  // namespace icerbf
