#pragma once

#include <functional>
#include <vector>

#include "ncdp/arbitrage.hpp"
#include "ncdp/value_curve.hpp"

namespace ncdp {

/// One reachable child in a one-period problem: move, conditional
/// probability, and the value of wealth landed at that child. Kinks of the
/// value function (curve knots, utility breakpoints) are listed so the
/// optimizer can place candidates exactly on their preimages.
struct ChildValue {
    double prob = 0.0;
    Vec delta;
    std::function<double(double)> value;
    std::vector<double> kinks;
};

struct OneStepSolution {
    Vec position;                      // in R^d, lies in the node's subspace
    double value = 0.0;
    std::vector<double> child_payoffs; // realized wealth per child, >= -1e-12
};

/// Globally maximizes xi |-> sum_i p_i V_i(x + <xi, delta_i>) over positions
/// in the node's subspace that keep every child wealth nonnegative (a compact
/// polytope inside the ball of radius x/beta). Multiresolution grid search
/// with exact kink-preimage candidates and a coordinate-descent polish;
/// exactly tied maximizers resolve to the lexicographically smallest
/// position. warm_start, when given, joins the candidate set.
OneStepSolution maximize_one_step(double wealth, const std::vector<ChildValue>& children,
                                  const NodeCertificate& cert, double tol,
                                  const Vec* warm_start = nullptr);

/// Same problem with children evaluated through interpolated curves.
OneStepSolution maximize_one_step(double wealth, const std::vector<Increment>& incs,
                                  const std::vector<const ValueCurve*>& child_curves,
                                  const NodeCertificate& cert, double tol);

struct CurveBuildResult {
    ValueCurve curve;
    std::vector<Vec> policy; // maximizer per grid point
    int repaired = 0;        // grid points lifted by the running maximum
    double worst_drop = 0.0; // largest raw monotonicity violation observed
};

/// Applies maximize_one_step at every grid wealth. Raw value drops are
/// repaired by a running maximum (the one-step value is non-decreasing in
/// wealth, so drops are numerical); drops beyond 10*tol abort.
CurveBuildResult build_value_curve(const std::vector<double>& grid,
                                   const std::vector<ChildValue>& children,
                                   const NodeCertificate& cert, double tol);

} // namespace ncdp
