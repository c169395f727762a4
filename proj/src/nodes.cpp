#include "icerbf/nodes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace icerbf {

namespace {

constexpr double kPi = 3.14159265358979323846;

double aniso_dist2(const Point2& p, const Point2& q, double a) {
    double dx = p.x - q.x;
    double dz = a * (p.z - q.z);
    return dx * dx + dz * dz;
}

// Equidistant abscissae on [lo, hi], n >= 2, endpoints included.
std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

int tag_rank(NodeTag t) {
    switch (t) {
        case NodeTag::Base: return 0;
        case NodeTag::LeftLateral:
        case NodeTag::RightLateral: return 1;
        case NodeTag::Surface: return 2;
        default: return 3;
    }
}

struct GridSpec {
    double h_x, h_z, aspect, z_low, z_high;
};

GridSpec grid_spec(const DomainProfile& profile, int n_x, int n_z) {
    GridSpec g;
    g.z_low = profile.z_low;
    g.z_high = profile.z_high;
    g.h_x = profile.length / (n_x - 1);
    g.h_z = (g.z_high - g.z_low) / (n_z - 1);
    g.aspect = g.h_x / g.h_z;
    return g;
}

NodeSet assemble_node_set(const DomainProfile& profile, int n_x, int n_z,
                          std::vector<Point2> interior) {
    GridSpec g = grid_spec(profile, n_x, n_z);
    auto boundary = boundary_nodes(profile, n_x, n_z, profile.cap_extent.has_value());

    // Drop interior nodes closer than h/4 to any boundary node in the scaled
    // norm; near-coincident nodes make the collocation matrices singular.
    const double h = std::sqrt(g.h_x * g.h_x + g.aspect * g.aspect * g.h_z * g.h_z);
    const double r2 = (h / 4.0) * (h / 4.0);
    std::vector<Point2> kept;
    kept.reserve(interior.size());
    for (const Point2& p : interior) {
        bool close = false;
        for (const TaggedNode& b : boundary) {
            if (aniso_dist2(p, b.p, g.aspect) < r2) {
                close = true;
                break;
            }
        }
        if (!close) kept.push_back(p);
    }
    if (kept.empty())
        throw std::runtime_error("node generation: no interior nodes survive inside profile '" +
                                 profile.name + "'");

    NodeSet ns;
    ns.h_x = g.h_x;
    ns.h_z = g.h_z;
    ns.aspect = g.aspect;
    ns.x_low = 0.0;
    ns.x_high = profile.length;
    ns.z_low = g.z_low;
    ns.z_high = g.z_high;
    ns.pts.reserve(kept.size() + boundary.size());
    ns.tags.reserve(kept.size() + boundary.size());
    for (const Point2& p : kept) {
        ns.pts.push_back(p);
        ns.tags.push_back(NodeTag::Interior);
    }
    std::vector<int> left, right;
    for (const TaggedNode& b : boundary) {
        if (b.tag == NodeTag::LeftLateral) left.push_back(ns.size());
        if (b.tag == NodeTag::RightLateral) right.push_back(ns.size());
        ns.pts.push_back(b.p);
        ns.tags.push_back(b.tag);
    }

    if (profile.lateral_bc == LateralBc::Periodic) {
        // Pair lateral nodes by vertical order; the left and right columns are
        // generated with the same count and relative spacing.
        auto by_z = [&](int i, int j) { return ns.pts[i].z < ns.pts[j].z; };
        std::sort(left.begin(), left.end(), by_z);
        std::sort(right.begin(), right.end(), by_z);
        if (left.size() != right.size())
            throw std::runtime_error("node generation: unmatched lateral columns");
        ns.periodic_left = std::move(left);
        ns.periodic_right = std::move(right);
    }
    return ns;
}

}  // namespace

double NodeSet::internodal_distance() const {
    return std::sqrt(h_x * h_x + aspect * aspect * h_z * h_z);
}

int NodeSet::count(NodeTag t) const {
    int n = 0;
    for (NodeTag tag : tags) n += (tag == t);
    return n;
}

double halton(std::uint64_t index, unsigned base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * (index % base);
        index /= base;
    }
    return r;
}

std::vector<double> chebyshev_points(double lo, double hi, int n) {
    std::vector<double> xs(n);
    double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    for (int k = 0; k < n; ++k)
        xs[k] = mid - half * std::cos(kPi * k / (n - 1));
    xs.front() = lo;
    xs.back() = hi;
    return xs;
}

std::vector<TaggedNode> boundary_nodes(const DomainProfile& profile, int n_x, int n_z,
                                       bool chebyshev_on_cap) {
    if (n_x < 3 || n_z < 3)
        throw std::invalid_argument("boundary_nodes: need n_x, n_z >= 3");
    const double L = profile.length;
    GridSpec g = grid_spec(profile, n_x, n_z);

    std::vector<TaggedNode> out;

    // Base: equidistant along the full extent.
    for (double x : linspace(0.0, L, n_x))
        out.push_back({{x, profile.bed(x)}, NodeTag::Base});

    // Top surface abscissae. Cap-bearing profiles carry the surface gradient
    // in the stress-free row, so their top line is sampled at twice the
    // background density with Chebyshev clustering over the cap.
    std::vector<double> top_x;
    if (chebyshev_on_cap && profile.cap_extent) {
        const Interval cap = *profile.cap_extent;
        auto seg_count = [&](double len) {
            return std::max(2, 3 * (int)std::lround(len / L * n_x) + 1);
        };
        if (cap.lo > 0.0) {
            auto xs = linspace(0.0, cap.lo, seg_count(cap.lo));
            top_x.insert(top_x.end(), xs.begin(), xs.end());
        }
        auto xs = chebyshev_points(cap.lo, cap.hi, seg_count(cap.length()));
        top_x.insert(top_x.end(), xs.begin() + (top_x.empty() ? 0 : 1), xs.end());
        if (cap.hi < L) {
            auto tail = linspace(cap.hi, L, seg_count(L - cap.hi));
            top_x.insert(top_x.end(), tail.begin() + 1, tail.end());
        }
    } else {
        top_x = linspace(0.0, L, n_x);
    }
    for (double x : top_x) out.push_back({{x, profile.surface(x)}, NodeTag::Surface});

    // Lateral columns: n_z equidistant nodes per edge, thinned when the edge
    // is too short to support half the background spacing (near-coincident
    // columns would make the collocation matrices singular).
    for (int side = 0; side < 2; ++side) {
        double x = side == 0 ? 0.0 : L;
        double zb = profile.bed(x), zs = profile.surface(x);
        int fit = (int)std::floor((zs - zb) / (0.5 * g.h_z)) + 1;
        int m = std::clamp(fit, 2, n_z);
        for (double z : linspace(zb, zs, m))
            out.push_back({{x, z}, side == 0 ? NodeTag::LeftLateral : NodeTag::RightLateral});
    }

    // Thin the boundary set to the h/4 separation the collocation matrices
    // need: near-coincident boundary nodes (segment joints, corners, thin-
    // shelf column pairs, clustered margin abscissae) would otherwise pin
    // the conditioning orders of magnitude above the shape-parameter target.
    // Stronger tags win; within a tag, generation order is kept.
    const double h = std::sqrt(g.h_x * g.h_x + g.aspect * g.aspect * g.h_z * g.h_z);
    const double min_dist2 = (h / 4.0) * (h / 4.0);
    std::stable_sort(out.begin(), out.end(), [](const TaggedNode& a, const TaggedNode& b) {
        return tag_rank(a.tag) < tag_rank(b.tag);
    });
    std::vector<TaggedNode> kept;
    for (const TaggedNode& cand : out) {
        bool close = false;
        for (const TaggedNode& have : kept) {
            if (aniso_dist2(cand.p, have.p, g.aspect) < min_dist2) {
                close = true;
                break;
            }
        }
        if (!close) kept.push_back(cand);
    }
    return kept;
}

NodeSet cartesian_nodes(const DomainProfile& profile, int n_x, int n_z) {
    if (n_x < 3 || n_z < 3)
        throw std::invalid_argument("cartesian_nodes: need n_x, n_z >= 3");
    GridSpec g = grid_spec(profile, n_x, n_z);
    std::vector<Point2> interior;
    for (int i = 1; i < n_x - 1; ++i) {
        double x = i * g.h_x;
        double zs = profile.surface(x), zb = profile.bed(x);
        for (int j = 1; j < n_z - 1; ++j) {
            double z = g.z_low + j * g.h_z;
            if (z > zb && z < zs) interior.push_back({x, z});
        }
    }
    return assemble_node_set(profile, n_x, n_z, std::move(interior));
}

NodeSet halton_nodes(const DomainProfile& profile, int n_x, int n_z) {
    if (n_x < 3 || n_z < 3)
        throw std::invalid_argument("halton_nodes: need n_x, n_z >= 3");
    GridSpec g = grid_spec(profile, n_x, n_z);
    std::vector<Point2> interior;
    const std::uint64_t total = (std::uint64_t)n_x * (std::uint64_t)n_z;
    for (std::uint64_t k = 1; k <= total; ++k) {
        double x = halton(k, 2) * profile.length;
        double z = g.z_low + halton(k, 3) * (g.z_high - g.z_low);
        if (x <= 0.0 || x >= profile.length) continue;
        if (z > profile.bed(x) && z < profile.surface(x)) interior.push_back({x, z});
    }
    return assemble_node_set(profile, n_x, n_z, std::move(interior));
}

void write_nodes_csv(const NodeSet& nodes, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("write_nodes_csv: cannot open " + path);
    std::fputs("x,z,tag\n", f);
    static const char* names[] = {"interior", "base", "surface", "left", "right"};
    for (int i = 0; i < nodes.size(); ++i)
        std::fprintf(f, "%.17g,%.17g,%s\n", nodes.pts[i].x, nodes.pts[i].z,
                     names[(int)nodes.tags[i]]);
    std::fclose(f);
}

}  // namespace icerbf
