#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "ncdp/one_step.hpp"
#include "ncdp/utility.hpp"

namespace ncdp {

struct GridConfig {
    int n_grid = 256;      // geometric wealth points per node, plus the exact 0
    double lo_frac = 1e-4; // first positive knot as a fraction of the node's cap
};

/// Wealth-indexed value curves per node; the terminal layer holds exact
/// utility evaluations on the grid.
struct ValueFunctionTable {
    std::map<std::string, ValueCurve> curves;
    const ValueCurve& at(const std::string& id) const;
};

/// Maximizing positions at each grid wealth of each internal node.
struct PolicyTable {
    std::map<std::string, std::vector<Vec>> positions;
};

struct DpResult {
    ValueFunctionTable values;
    PolicyTable policy;
    double v_star = 0.0; // root curve at x0: value achieved by the pasted strategy
    double x0 = 0.0;
    int repaired = 0;        // monotonicity repairs across all curves
    double worst_drop = 0.0; // largest raw value drop repaired
};

/// Backward induction from the terminal utility down to the root. Refuses to
/// run when the certificate carries a witness; when a growth certificate is
/// supplied it is falsified on the default grids first.
DpResult backward_induct(const ScenarioTree& tree, const UtilityModel& utility,
                         const std::optional<GrowthCertificate>& growth,
                         const TreeCertificate& na, double x0, const GridConfig& grid = {},
                         double tol = 1e-4);

/// Polynomial value envelope J per node:
///   J(leaf) = max{(u+(x_bar) + c) / x_bar^gamma, u+(x_bar)},
///   J(node) = sum_i p_i J(child_i) (1 + ||delta_i|| / beta(node))^gamma.
/// Requires x_bar > 0.
struct BoundTable {
    std::map<std::string, double> J;
    double gamma_bar = 1.0;
};

BoundTable compute_J(const ScenarioTree& tree, const GrowthCertificate& growth,
                     const TreeCertificate& na, const UtilityModel& utility);

struct BoundCheck {
    bool pass = true;
    double worst_slack = 0.0; // min over checks of bound - value
    std::string worst_node;
    double root_bound = 0.0; // (1 + x0^gamma) J(root)
};

/// Verifies value <= J (x^gamma + 1) + 1e-6 at every grid point of every
/// node, and the root value against (1 + x0^gamma) J(root).
BoundCheck check_bounds(const ScenarioTree& tree, const ValueFunctionTable& tables,
                        const BoundTable& bounds, double gamma_bar, double x0, double v_star);

struct NodePlan {
    double wealth = 0.0;
    Vec position; // empty at leaves
};

struct ForwardPlan {
    double x0 = 0.0;
    std::map<std::string, NodePlan> nodes;
};

/// Forward pass from the root: at every internal node the position is
/// re-solved at the exact realized wealth (interpolating stored positions
/// could break admissibility). Realized wealths must stay within the
/// gridded range.
ForwardPlan assemble_strategy(const ScenarioTree& tree, const UtilityModel& utility,
                              const TreeCertificate& na, const DpResult& dp, double tol = 1e-4);

/// Position per internal node; wealth evolves from x0 through the moves.
struct Strategy {
    double x0 = 0.0;
    std::map<std::string, Vec> positions;
};

Strategy plan_to_strategy(const ForwardPlan& plan);

/// Exact expected terminal utility of an admissible strategy. Throws when a
/// realized wealth falls below -1e-12.
double evaluate_strategy(const ScenarioTree& tree, const Strategy& strategy,
                         const UtilityModel& utility);

struct GrowthPropagationReport {
    bool pass = true;
    double worst_slack = 0.0;
    std::string worst_node;
    double worst_lambda = 0.0;
    double worst_x = 0.0;
};

/// Checks that the terminal growth bound survives the induction: at every
/// node, value+(lambda x) <= lambda^gamma [value+(x) + Cbar(node)] on a
/// lambda-times-wealth grid, with Cbar(node) = E[C_lifted | node] +
/// E[(next layer value at 0)^- | node] (at leaves, Cbar = C_lifted).
GrowthPropagationReport check_growth_propagation(const ScenarioTree& tree,
                                                 const ValueFunctionTable& tables,
                                                 const GrowthCertificate& lifted,
                                                 const std::vector<double>& lambda_grid,
                                                 int x_points = 40);

/// Run artifact JSON (policy of the assembled plan, value, bounds, seed).
std::string artifact_to_json(const ScenarioTree& tree, const DpResult& dp,
                             const ForwardPlan& plan, const std::optional<BoundTable>& bounds,
                             std::uint64_t seed);

/// Full table dump used by the CSV exporter.
std::string tables_to_json(const ScenarioTree& tree, const ValueFunctionTable& values,
                           const PolicyTable& policy);

/// Deterministic CSV: header t,node,wealth,value,xi_1..xi_d; rows sorted by
/// (t, node id, wealth); 9 significant digits; LF endings. layer = -1 keeps
/// every layer.
std::string tables_json_to_csv(const std::string& tables_json, int layer = -1);

} // namespace ncdp
