#pragma once

#include <array>
#include <memory>
#include <vector>

#include "icerbf/collocation.hpp"
#include "icerbf/rbf.hpp"

namespace icerbf {

/// Compactly supported C2 bump: (1-r)^4 (4r+1) on [0,1], zero beyond.
double wendland(double r);

/// Elliptical patch: a disc of the given radius in the scaled norm.
struct Patch {
    Point2 center;
    double radius = 0.0;
};

/// Overlapping cover of the domain bounding box by anisotropic patches,
/// plus node membership once nodes are assigned.
struct PatchCover {
    double aspect = 1.0;
    double overlap = 0.25;
    std::vector<Patch> patches;
    std::vector<std::vector<int>> members;   // per patch: node indices inside
    std::vector<std::vector<int>> covering;  // per node: patches containing it

    int patch_count() const { return (int)patches.size(); }
    /// Mean patch diameter in the scaled norm (refinement measure).
    double mean_diameter() const;
};

/// Regular grid of patch centers over a bounding box; radii inflate the
/// half-diagonal of a grid cell (in the scaled norm) by the overlap fraction,
/// so adjacent patches overlap and corners stay strictly covered.
PatchCover build_cover(const Point2& box_lo, const Point2& box_hi, double aspect,
                       int patches_x, int patches_z, double overlap);

/// Fill membership lists: drops patches containing no nodes, grows patches
/// with fewer than `min_nodes` members to their min_nodes nearest nodes, and
/// verifies every node is strictly inside at least one patch.
void assign_nodes(PatchCover& cover, std::span<const Point2> pts, int min_nodes = 12);

PatchCover build_cover_for(const NodeSet& nodes, int patches_x, int patches_z, double overlap,
                           int min_nodes = 12);

/// Shepard weights of all patches covering x, with derivatives up to
/// second order (indexed by DiffOrder). Throws if x is uncovered.
struct PuWeights {
    std::vector<int> patch;
    std::vector<std::array<double, kDiffOrders>> w;
};
PuWeights pu_weights(const PatchCover& cover, const Point2& x);

/// Partition-of-unity collocation: local dense systems per patch blended by
/// Shepard weights into sparse global operators.
///
/// Patch-local factorizations are computed once at construction and reused;
/// operator assembly is parallel over patches with a deterministic merge,
/// so results do not depend on the thread count.
class PumCollocation : public Collocation {
public:
    PumCollocation(BasisSpec spec, const NodeSet& nodes, PatchCover cover);
    ~PumCollocation() override;

    int size() const override;
    using Collocation::make_operator;
    std::unique_ptr<LinearOperator> make_operator(std::span<const RowSpec> rows,
                                                  std::array<bool, kDiffOrders> orders) const override;
    Eigen::VectorXd derivative(DiffOrder order, const Eigen::VectorXd& nodal) const override;
    std::unique_ptr<FieldEvaluator> interpolant(const Eigen::VectorXd& nodal) const override;
    double interpolation_condition() const override;

    const PatchCover& cover() const;
    /// Sparse nodal differentiation operator for one order (built on first use).
    const SpMat& nodal_diff_matrix(DiffOrder order) const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

/// Straightforward serial assembly of the blended global operator, built
/// row by row from the defining formula with fresh local solves. Kept as
/// the reference implementation for validating the production assembler;
/// use only on small problems.
Eigen::MatrixXd assemble_reference(const BasisSpec& spec, const NodeSet& nodes,
                                   const PatchCover& cover, std::span<const RowSpec> rows);

}  // namespace icerbf
