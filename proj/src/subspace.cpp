#include "ncdp/subspace.hpp"

#include <stdexcept>

namespace ncdp {

namespace {

constexpr double kRankRelTol = 1e-9;
constexpr double kOriginTol = 1e-10;

// Deterministic sign convention: first entry above 1e-12 in absolute value
// is made positive.
void fix_column_signs(Eigen::MatrixXd& m) {
    for (int c = 0; c < m.cols(); ++c) {
        for (int r = 0; r < m.rows(); ++r) {
            if (std::abs(m(r, c)) > 1e-12) {
                if (m(r, c) < 0.0) m.col(c) = -m.col(c);
                break;
            }
        }
    }
}

} // namespace

AffineHull support_hull_basis(const std::vector<Vec>& points) {
    if (points.empty()) throw std::invalid_argument("support_hull_basis: empty support");
    const int d = static_cast<int>(points.front().size());
    const Vec& anchor = points.front();

    double scale = 0.0;
    for (const Vec& p : points) {
        if (p.size() != d) throw std::invalid_argument("support_hull_basis: mixed dimensions");
        scale = std::max(scale, p.norm());
    }

    Eigen::MatrixXd diffs(d, static_cast<int>(points.size()) - 1);
    for (int i = 1; i < static_cast<int>(points.size()); ++i)
        diffs.col(i - 1) = points[i] - anchor;

    AffineHull hull;
    hull.basis.vectors = Eigen::MatrixXd::Zero(d, 0);
    if (diffs.cols() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs, Eigen::ComputeThinU);
        const auto& sv = svd.singularValues();
        const double cutoff = sv.size() > 0 ? kRankRelTol * sv(0) : 0.0;
        int rank = 0;
        while (rank < sv.size() && sv(rank) > cutoff && sv(rank) > 0.0) ++rank;
        hull.basis.vectors = svd.matrixU().leftCols(rank);
        fix_column_signs(hull.basis.vectors);
    }

    const Vec residual = anchor - project(anchor, hull.basis);
    hull.is_linear = residual.norm() <= kOriginTol * std::max(1.0, scale);
    return hull;
}

AffineHull support_hull_basis(const std::vector<Increment>& incs) {
    std::vector<Vec> points;
    points.reserve(incs.size());
    for (const Increment& inc : incs) points.push_back(inc.delta);
    return support_hull_basis(points);
}

Vec project(const Vec& v, const SubspaceBasis& basis) {
    if (basis.dim() == 0) return Vec::Zero(v.size());
    if (v.size() != basis.ambient_dim())
        throw std::invalid_argument("project: vector dimension mismatch");
    return basis.vectors * (basis.vectors.transpose() * v);
}

} // namespace ncdp
