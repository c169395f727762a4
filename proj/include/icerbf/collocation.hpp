#pragma once

#include <memory>

#include "icerbf/linalg.hpp"
#include "icerbf/nodes.hpp"

namespace icerbf {

/// Point evaluator of an interpolated nodal field and its derivatives.
/// Immutable; safe to share across threads.
class FieldEvaluator {
public:
    virtual ~FieldEvaluator() = default;
    virtual double operator()(const Point2& p, DiffOrder order) const = 0;
};

/// A collocation discretization over a fixed node set: builds square
/// operator systems, nodal differentiation, and point interpolants.
/// Implementations: global (dense) and partition-of-unity (sparse).
class Collocation {
public:
    virtual ~Collocation() = default;
    virtual int size() const = 0;

    /// Build a system with one row per node. `orders` declares which
    /// differentiation orders later update() calls may use; defaults to
    /// everything referenced by the initial rows.
    virtual std::unique_ptr<LinearOperator> make_operator(
        std::span<const RowSpec> rows, std::array<bool, kDiffOrders> orders) const = 0;
    std::unique_ptr<LinearOperator> make_operator(std::span<const RowSpec> rows) const;

    /// Nodal derivative of a nodal field (square differentiation operator).
    virtual Eigen::VectorXd derivative(DiffOrder order, const Eigen::VectorXd& nodal) const = 0;

    virtual std::unique_ptr<FieldEvaluator> interpolant(const Eigen::VectorXd& nodal) const = 0;

    /// Hager 1-norm condition estimate of the (weighted) interpolation matrix.
    virtual double interpolation_condition() const = 0;
};

}  // namespace icerbf
