#pragma once

#include <optional>

#include "ncdp/arbitrage.hpp"
#include "ncdp/dp.hpp"

namespace ncdp {

/// Exhaustive strategy-grid maximization report. A strategy is a function of
/// the node (the node encodes the whole past), so the search enumerates a
/// position grid per node, propagating exact wealths forward.
struct OracleReport {
    double best_value = 0.0;
    Strategy best_strategy;
    int per_node_grid = 0;      // points per axis of the position grids
    bool boundary_flag = false; // some best position sat on the search radius
    bool unbounded_suspect = false; // best kept improving as the radius doubled
    bool compared = false;
    bool pass = false;
    double gap = 0.0; // relative gap against the DP value
};

/// Enumerates admissible positions per node (in the move-subspace basis,
/// radius 1.05 x wealth / beta) and maximizes the exact expected terminal
/// utility. Ties resolve to the lexicographically smallest position. The
/// product of grid sizes along any path is capped at 1e7.
///
/// When the certificate carries a witness the wealth/beta radius is
/// unavailable: the search reruns on doubling fallback radii and flags
/// unboundedness when the optimum keeps sitting on the boundary with
/// increasing value.
OracleReport brute_force_value(const ScenarioTree& tree, const UtilityModel& utility, double x0,
                               int per_node_grid, const TreeCertificate& cert);

/// Fills the comparison verdict against a DP value:
/// |dp - oracle| <= rel_tol * max(1, |oracle|).
void compare_with_dp(OracleReport& report, double dp_value, double rel_tol);

/// Searches zero-initial-wealth strategy grids for a plan whose leaf wealths
/// are all >= -1e-12 with one above 1e-9: single-node-supported strategies on
/// a fine grid first, then joint multi-node combinations on a coarse grid.
std::optional<Strategy> find_arbitrage(const ScenarioTree& tree, int per_node_grid);

} // namespace ncdp
