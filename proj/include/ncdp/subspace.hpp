#pragma once

#include <vector>

#include "ncdp/scenario_tree.hpp"

namespace ncdp {

/// Orthonormal basis of a linear subspace of R^d. k = 0 encodes {0}.
struct SubspaceBasis {
    Eigen::MatrixXd vectors; // d x k, orthonormal columns

    int ambient_dim() const { return static_cast<int>(vectors.rows()); }
    int dim() const { return static_cast<int>(vectors.cols()); }

    /// Coordinates of v in the basis (k-vector).
    Vec coords(const Vec& v) const { return vectors.transpose() * v; }
    /// Embeds basis coordinates back into R^d.
    Vec embed(const Vec& w) const {
        return dim() == 0 ? Vec::Zero(ambient_dim()) : Vec(vectors * w);
    }
};

/// Affine hull of a support set, described by an orthonormal direction basis
/// plus the flag telling whether the hull passes through the origin (in which
/// case it is the linear span of the support points).
struct AffineHull {
    SubspaceBasis basis;
    bool is_linear = false;
};

/// Basis of the affine hull of the price-move support at one node.
///
/// The direction space is spanned by differences of support points; rank is
/// decided at 1e-9 relative to the largest singular value. The hull counts as
/// linear when the origin lies on it within 1e-10 (scale-guarded) after
/// projecting out the direction space.
AffineHull support_hull_basis(const std::vector<Vec>& points);
AffineHull support_hull_basis(const std::vector<Increment>& incs);

/// Orthogonal projection of v onto the spanned subspace. Idempotent and
/// norm-nonincreasing; the zero-dimensional basis maps everything to 0.
Vec project(const Vec& v, const SubspaceBasis& basis);

} // namespace ncdp
