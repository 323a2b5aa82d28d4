#include "ncdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>

namespace ncdp {

namespace {

constexpr double kLeafFloor = -1e-12;
constexpr double kStrictGain = 1e-9;

struct NodeGeometry {
    SubspaceBasis basis;
    std::vector<Vec> z; // child moves in basis coordinates
};

// span_of_moves widens the basis from the affine-hull direction space to the
// full linear span of the moves: a free-lunch direction can stick out of the
// direction space when the hull misses the origin.
NodeGeometry node_geometry(const ScenarioTree& tree, int node, bool span_of_moves) {
    NodeGeometry geo;
    const auto incs = tree.increments(node);
    if (span_of_moves) {
        std::vector<Vec> pts{Vec::Zero(tree.asset_count())};
        for (const Increment& inc : incs) pts.push_back(inc.delta);
        geo.basis = support_hull_basis(pts).basis;
    } else {
        geo.basis = support_hull_basis(incs).basis;
    }
    for (const Increment& inc : incs) geo.z.push_back(geo.basis.coords(inc.delta));
    return geo;
}

// Position grid for one node: 1-d uses the exact admissible interval, higher
// dimensions a box of the given radius filtered later.
std::vector<Vec> position_grid(const NodeGeometry& geo, double wealth, double radius, int points) {
    const int k = geo.basis.dim();
    std::vector<Vec> grid;
    if (k == 0) {
        grid.push_back(Vec::Zero(0));
        return grid;
    }
    if (k == 1) {
        double lo = -radius, hi = radius;
        for (const Vec& z : geo.z) {
            if (z(0) > 1e-14) lo = std::max(lo, -wealth / z(0));
            if (z(0) < -1e-14) hi = std::min(hi, -wealth / z(0));
        }
        if (lo > hi) {
            grid.push_back(Vec::Zero(1));
            return grid;
        }
        for (int j = 0; j < points; ++j) {
            Vec w(1);
            w(0) = lo + (hi - lo) * j / (points - 1);
            grid.push_back(w);
        }
        return grid;
    }
    // bounding box of the admissible polytope: vertices sit on k active
    // child constraints; gridding the box instead of the whole radius ball
    // keeps the resolution useful on thin polytopes
    Vec lo = Vec::Constant(k, -radius);
    Vec hi = Vec::Constant(k, radius);
    if (std::isfinite(wealth) && (k == 2 || k == 3)) {
        std::vector<Vec> verts{Vec::Zero(k)};
        const int m = static_cast<int>(geo.z.size());
        std::vector<int> subset(k);
        std::function<void(int, int)> rec = [&](int start, int depth) {
            if (depth == k) {
                Eigen::MatrixXd A(k, k);
                for (int j = 0; j < k; ++j) A.row(j) = geo.z[subset[j]].transpose();
                Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
                if (lu.rank() < k) return;
                const Vec w = lu.solve(Vec::Constant(k, -wealth));
                if (w.norm() > radius * (1.0 + 1e-9)) return;
                for (const Vec& z : geo.z)
                    if (wealth + w.dot(z) < -1e-9 * (1.0 + wealth)) return;
                verts.push_back(w);
                return;
            }
            for (int i = start; i <= m - (k - depth); ++i) {
                subset[depth] = i;
                rec(i + 1, depth + 1);
            }
        };
        rec(0, 0);
        if (static_cast<int>(verts.size()) >= k + 1) {
            for (int j = 0; j < k; ++j) {
                double a = 0.0, b = 0.0;
                for (const Vec& v : verts) {
                    a = std::min(a, v(j));
                    b = std::max(b, v(j));
                }
                lo(j) = std::max(lo(j), a);
                hi(j) = std::min(hi(j), b);
            }
            // corner optima sit exactly on these
            for (const Vec& v : verts) grid.push_back(v);
        }
    }
    std::vector<int> idx(k, 0);
    while (true) {
        Vec w(k);
        for (int j = 0; j < k; ++j)
            w(j) = lo(j) + (hi(j) - lo(j)) * idx[j] / (points - 1);
        grid.push_back(w);
        int j = k - 1; // last axis fastest keeps lexicographic order
        while (j >= 0 && ++idx[j] == points) idx[j--] = 0;
        if (j < 0) break;
    }
    return grid;
}

} // namespace

OracleReport brute_force_value(const ScenarioTree& tree, const UtilityModel& utility, double x0,
                               int per_node_grid, const TreeCertificate& cert) {
    if (x0 < 0.0) throw std::invalid_argument("oracle: x0 must be nonnegative");
    if (per_node_grid < 3) throw std::invalid_argument("oracle: need at least 3 grid points");

    // under a certificate the admissible search lives in the move subspace
    // (projections leave payoffs unchanged); without one, widen to the span
    std::vector<NodeGeometry> geo(tree.size());
    for (int node : tree.internal_nodes())
        geo[node] = node_geometry(tree, node, !cert.no_arbitrage());

    // cost along paths: grid size multiplies down the tree
    {
        std::vector<double> cost(tree.size(), 1.0);
        for (int t = tree.horizon() - 1; t >= 0; --t) {
            for (int node : tree.layer(t)) {
                double sum = 0.0;
                for (int c : tree.node(node).children) sum += cost[c];
                const int k = std::max(1, geo[node].basis.dim());
                cost[node] = std::pow(static_cast<double>(per_node_grid), k) * sum;
            }
        }
        if (cost[tree.root()] > 1e7)
            throw std::invalid_argument("oracle: search-space cap of 1e7 evaluations exceeded");
    }

    const bool certified = cert.no_arbitrage();
    double boundary_hits = 0.0;

    // best value from this node at this wealth; positions filled on the
    // reconstruction pass
    std::function<double(int, double, double, Strategy*)> solve =
        [&](int node, double wealth, double radius_scale, Strategy* out) -> double {
        const TreeNode& n = tree.node(node);
        if (n.is_leaf()) return utility.eval(std::max(wealth, 0.0), n.id);
        const double radius = certified
                                  ? 1.05 * wealth / cert.at(n.id).beta
                                  : radius_scale * std::max(1.0, wealth);
        const auto incs = tree.increments(node);
        double best = -std::numeric_limits<double>::infinity();
        Vec best_w;
        for (const Vec& w : position_grid(geo[node], wealth, radius, per_node_grid)) {
            bool ok = true;
            for (const Vec& z : geo[node].z)
                if (wealth + w.dot(z) < kLeafFloor) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            double value = 0.0;
            for (std::size_t i = 0; i < incs.size(); ++i)
                value += incs[i].prob *
                         solve(incs[i].child, wealth + w.dot(geo[node].z[i]), radius_scale, nullptr);
            if (value > best) {
                best = value;
                best_w = w;
            }
        }
        if (best == -std::numeric_limits<double>::infinity()) {
            // no grid point admissible; the zero position always is
            best_w = Vec::Zero(geo[node].basis.dim());
            best = 0.0;
            for (std::size_t i = 0; i < incs.size(); ++i)
                best = best + incs[i].prob * solve(incs[i].child, wealth, radius_scale, nullptr);
        }
        if (out != nullptr) {
            out->positions[n.id] = geo[node].basis.embed(best_w);
            if (best_w.size() > 0 && best_w.norm() >= 0.999 * radius) boundary_hits += 1.0;
            for (std::size_t i = 0; i < incs.size(); ++i)
                solve(incs[i].child, wealth + best_w.dot(geo[node].z[i]), radius_scale, out);
        }
        return best;
    };

    OracleReport report;
    report.per_node_grid = per_node_grid;
    report.best_strategy.x0 = x0;

    if (certified) {
        report.best_value = solve(tree.root(), x0, 0.0, &report.best_strategy);
    } else {
        // doubling fallback radii; keep the last sweep's strategy
        double prev = -std::numeric_limits<double>::infinity();
        int rising_on_boundary = 0;
        for (double scale : {1.0, 2.0, 4.0}) {
            boundary_hits = 0.0;
            Strategy s;
            s.x0 = x0;
            const double v = solve(tree.root(), x0, scale, &s);
            if (boundary_hits > 0.0 && v > prev + kStrictGain) ++rising_on_boundary;
            prev = v;
            report.best_value = v;
            report.best_strategy = std::move(s);
            report.boundary_flag = boundary_hits > 0.0;
        }
        report.unbounded_suspect = rising_on_boundary >= 2;
        return report;
    }
    report.boundary_flag = boundary_hits > 0.0;
    return report;
}

void compare_with_dp(OracleReport& report, double dp_value, double rel_tol) {
    report.compared = true;
    report.gap = std::abs(dp_value - report.best_value) /
                 std::max(1.0, std::abs(report.best_value));
    report.pass = report.gap <= rel_tol;
}

std::optional<Strategy> find_arbitrage(const ScenarioTree& tree, int per_node_grid) {
    if (per_node_grid < 3) throw std::invalid_argument("oracle: need at least 3 grid points");
    const std::vector<int> internals = tree.internal_nodes();
    std::vector<NodeGeometry> geo(tree.size());
    for (int node : internals) geo[node] = node_geometry(tree, node, true);

    // leaf wealths of a zero-initial-wealth plan; only the terminal values
    // are sign-constrained. coords[node] of size 0 means "no position".
    const std::vector<int> leaves = tree.leaves();
    std::vector<double> wealth(tree.size(), 0.0);
    auto is_witness = [&](const std::vector<Vec>& coords) {
        for (int t = 0; t < tree.horizon(); ++t) {
            for (int node : tree.layer(t)) {
                const bool active = coords[node].size() > 0;
                const auto& zs = geo[node].z;
                for (std::size_t i = 0; i < zs.size(); ++i) {
                    double w = wealth[node];
                    if (active) w += coords[node].dot(zs[i]);
                    wealth[tree.node(node).children[i]] = w;
                }
            }
        }
        bool strict = false;
        for (int leaf : leaves) {
            if (wealth[leaf] < kLeafFloor) return false;
            if (wealth[leaf] > kStrictGain) strict = true;
        }
        return strict;
    };
    auto to_strategy = [&](const std::vector<Vec>& coords) {
        Strategy s;
        s.x0 = 0.0;
        for (int node : internals)
            s.positions[tree.node(node).id] = coords[node].size() == 0
                                                  ? Vec::Zero(tree.asset_count())
                                                  : geo[node].basis.embed(coords[node]);
        return s;
    };

    // strategies supported on a single node, fine grid; intermediate wealth
    // may go negative here, so the grid is the full unit box
    const double unbounded = std::numeric_limits<double>::infinity();
    std::vector<Vec> coords(tree.size());
    for (int node : internals) {
        if (geo[node].basis.dim() == 0) continue;
        for (const Vec& w : position_grid(geo[node], unbounded, 1.0, per_node_grid)) {
            if (w.norm() < 1e-9) continue;
            coords[node] = w;
            if (is_witness(coords)) return to_strategy(coords);
        }
        coords[node] = Vec();
    }

    // joint multi-node combinations on a coarse grid, capped at 1e7 plans
    int joint_points = std::min(per_node_grid, 5);
    auto combos = [&](int pts) {
        double total = 1.0;
        for (int node : internals)
            total *= std::pow(static_cast<double>(pts), std::max(1, geo[node].basis.dim()));
        return total;
    };
    while (joint_points > 3 && combos(joint_points) > 1e7) --joint_points;
    if (combos(joint_points) <= 1e7) {
        std::vector<std::vector<Vec>> grids;
        for (int node : internals)
            grids.push_back(position_grid(geo[node], unbounded, 1.0, joint_points));
        std::vector<std::size_t> idx(internals.size(), 0);
        while (true) {
            for (std::size_t j = 0; j < internals.size(); ++j)
                coords[internals[j]] = grids[j][idx[j]];
            if (is_witness(coords)) return to_strategy(coords);
            std::size_t j = 0;
            while (j < idx.size() && ++idx[j] == grids[j].size()) idx[j++] = 0;
            if (j == idx.size()) break;
        }
    }
    return std::nullopt;
}

} // namespace ncdp
