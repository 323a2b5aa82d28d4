#include "ncdp/dp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace ncdp {

namespace {

int worker_cap() {
    if (const char* env = std::getenv("NONCONCAVE_DP_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(4u, hw == 0 ? 1u : hw));
}

// Runs fn(i) for every index, fanning out across at most worker_cap threads.
// Results must be written to per-index slots; the merge is order-free.
void for_each_index(const std::vector<int>& indices, const std::function<void(int)>& fn) {
    const int workers = std::min<int>(worker_cap(), static_cast<int>(indices.size()));
    if (workers <= 1) {
        for (int i : indices) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t mine = next.fetch_add(1);
                if (mine >= indices.size()) return;
                fn(indices[mine]);
            }
        });
    }
    for (auto& t : pool) t.join();
}

std::vector<ChildValue> child_values(const ScenarioTree& tree, int node,
                                     const UtilityModel& utility,
                                     const ValueFunctionTable& tables,
                                     const std::vector<double>& wealth_cap) {
    std::vector<ChildValue> children;
    for (const Increment& inc : tree.increments(node)) {
        const TreeNode& child = tree.node(inc.child);
        ChildValue cv;
        cv.prob = inc.prob;
        cv.delta = inc.delta;
        if (child.is_leaf()) {
            // terminal layer: evaluate the utility itself, not its interpolant
            const std::string id = child.id;
            cv.value = [&utility, id](double x) { return utility.eval(x, id); };
            cv.kinks = utility.breakpoints(0.0, wealth_cap[inc.child], id);
        } else {
            const ValueCurve* curve = &tables.at(child.id);
            cv.value = [curve](double x) { return curve->eval(x); };
            cv.kinks = curve->wealth();
        }
        children.push_back(std::move(cv));
    }
    return children;
}

} // namespace

const ValueCurve& ValueFunctionTable::at(const std::string& id) const {
    auto it = curves.find(id);
    if (it == curves.end()) throw std::invalid_argument("tables: no curve for node '" + id + "'");
    return it->second;
}

DpResult backward_induct(const ScenarioTree& tree, const UtilityModel& utility,
                         const std::optional<GrowthCertificate>& growth,
                         const TreeCertificate& na, double x0, const GridConfig& grid,
                         double tol) {
    if (!na.no_arbitrage())
        throw ArbitrageError(na.witness->node,
                             "backward_induct: refusing to optimize, arbitrage at node '" +
                                 na.witness->node + "'");
    if (x0 < 0.0) throw std::invalid_argument("backward_induct: x0 must be nonnegative");
    if (!(tol > 0.0)) throw std::invalid_argument("backward_induct: tol must be positive");
    if (grid.n_grid < 16) throw std::invalid_argument("backward_induct: n_grid must be at least 16");

    std::vector<std::string> leaf_ids;
    for (int leaf : tree.leaves()) leaf_ids.push_back(tree.node(leaf).id);
    if (growth) {
        if (auto cex =
                falsify_growth(utility, *growth, default_lambda_grid(), default_x_grid(*growth), leaf_ids))
            throw GrowthFalsifiedError(*cex, "backward_induct: growth certificate falsified");
    }

    const std::vector<double> cap = wealth_bounds(tree, x0, na);

    DpResult result;
    result.x0 = x0;

    // terminal layer: exact utility values on breakpoint-enriched grids
    for (int leaf : tree.leaves()) {
        const std::string& id = tree.node(leaf).id;
        const std::vector<double> g =
            make_wealth_grid(cap[leaf], grid.n_grid, grid.lo_frac, utility.breakpoints(0.0, cap[leaf], id));
        std::vector<double> values;
        values.reserve(g.size());
        double prev = -std::numeric_limits<double>::infinity();
        for (double x : g) {
            prev = std::max(prev, utility.eval(x, id));
            values.push_back(prev);
        }
        result.values.curves.emplace(id, ValueCurve(g, std::move(values)));
    }

    // earlier layers, children before parents
    for (int t = tree.horizon() - 1; t >= 0; --t) {
        const std::vector<int>& layer = tree.layer(t);
        std::vector<std::optional<CurveBuildResult>> built(tree.size());
        std::vector<std::exception_ptr> errors(tree.size());
        for_each_index(layer, [&](int node) {
            try {
                const std::string& id = tree.node(node).id;
                const std::vector<ChildValue> children =
                    child_values(tree, node, utility, result.values, cap);
                const std::vector<double> g = make_wealth_grid(
                    cap[node], grid.n_grid, grid.lo_frac, utility.breakpoints(0.0, cap[node], id));
                built[node] = build_value_curve(g, children, na.at(id), tol);
            } catch (...) {
                errors[node] = std::current_exception();
            }
        });
        for (int node : layer) {
            if (errors[node]) std::rethrow_exception(errors[node]);
            const std::string& id = tree.node(node).id;
            result.repaired += built[node]->repaired;
            result.worst_drop = std::max(result.worst_drop, built[node]->worst_drop);
            result.policy.positions.emplace(id, std::move(built[node]->policy));
            result.values.curves.emplace(id, std::move(built[node]->curve));
        }
    }

    result.v_star = result.values.at(tree.node(tree.root()).id).eval(x0);
    return result;
}

BoundTable compute_J(const ScenarioTree& tree, const GrowthCertificate& growth,
                     const TreeCertificate& na, const UtilityModel& utility) {
    if (!(growth.x_bar > 0.0))
        throw std::invalid_argument("compute_J: bound unavailable, x_bar must be positive");
    if (!na.no_arbitrage()) throw ArbitrageError(na.witness->node, "compute_J: arbitrage present");

    BoundTable table;
    table.gamma_bar = growth.gamma_bar;
    const double xg = std::pow(growth.x_bar, growth.gamma_bar);
    for (int leaf : tree.leaves()) {
        const std::string& id = tree.node(leaf).id;
        const double up = utility.eval_plus(growth.x_bar, id);
        table.J[id] = std::max((up + growth.c.at(id)) / xg, up);
    }
    for (int t = tree.horizon() - 1; t >= 0; --t) {
        for (int node : tree.layer(t)) {
            const std::string& id = tree.node(node).id;
            const double beta = na.at(id).beta;
            double j = 0.0;
            for (const Increment& inc : tree.increments(node))
                j += inc.prob * table.J.at(tree.node(inc.child).id) *
                     std::pow(1.0 + inc.delta.norm() / beta, growth.gamma_bar);
            table.J[id] = j;
        }
    }
    return table;
}

BoundCheck check_bounds(const ScenarioTree& tree, const ValueFunctionTable& tables,
                        const BoundTable& bounds, double gamma_bar, double x0, double v_star) {
    BoundCheck report;
    report.worst_slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < tree.size(); ++i) {
        const std::string& id = tree.node(i).id;
        const ValueCurve& curve = tables.at(id);
        const double j = bounds.J.at(id);
        for (int p = 0; p < curve.size(); ++p) {
            const double x = curve.wealth()[p];
            const double slack = j * (std::pow(x, gamma_bar) + 1.0) - curve.values()[p];
            if (slack < report.worst_slack) {
                report.worst_slack = slack;
                report.worst_node = id;
            }
            if (slack < -1e-6) report.pass = false;
        }
    }
    report.root_bound =
        (1.0 + std::pow(x0, gamma_bar)) * bounds.J.at(tree.node(tree.root()).id);
    if (v_star > report.root_bound + 1e-6) report.pass = false;
    return report;
}

ForwardPlan assemble_strategy(const ScenarioTree& tree, const UtilityModel& utility,
                              const TreeCertificate& na, const DpResult& dp, double tol) {
    const std::vector<double> cap = wealth_bounds(tree, dp.x0, na);
    ForwardPlan plan;
    plan.x0 = dp.x0;
    std::vector<double> wealth(tree.size(), 0.0);
    wealth[tree.root()] = dp.x0;
    for (int t = 0; t < tree.horizon(); ++t) {
        for (int node : tree.layer(t)) {
            const std::string& id = tree.node(node).id;
            double w = wealth[node];
            if (w < -1e-9)
                throw std::runtime_error("assemble_strategy: negative wealth at node '" + id + "'");
            w = std::max(w, 0.0);
            if (w > cap[node] * (1.0 + 1e-9) + 1e-12)
                throw std::runtime_error("assemble_strategy: wealth " + std::to_string(w) +
                                         " exceeds the gridded range at node '" + id + "'");
            const std::vector<ChildValue> children = child_values(tree, node, utility, dp.values, cap);
            const OneStepSolution sol = maximize_one_step(w, children, na.at(id), tol);
            plan.nodes[id] = NodePlan{w, sol.position};
            const auto& incs = tree.increments(node);
            for (std::size_t i = 0; i < incs.size(); ++i)
                wealth[incs[i].child] = sol.child_payoffs[i];
        }
    }
    for (int leaf : tree.leaves())
        plan.nodes[tree.node(leaf).id] = NodePlan{std::max(wealth[leaf], 0.0), Vec()};
    return plan;
}

Strategy plan_to_strategy(const ForwardPlan& plan) {
    Strategy s;
    s.x0 = plan.x0;
    for (const auto& [id, node] : plan.nodes)
        if (node.position.size() > 0) s.positions[id] = node.position;
    return s;
}

double evaluate_strategy(const ScenarioTree& tree, const Strategy& strategy,
                         const UtilityModel& utility) {
    if (strategy.x0 < 0.0) throw std::invalid_argument("evaluate_strategy: x0 must be nonnegative");
    std::vector<double> wealth(tree.size(), 0.0);
    wealth[tree.root()] = strategy.x0;
    for (int t = 0; t < tree.horizon(); ++t) {
        for (int node : tree.layer(t)) {
            const std::string& id = tree.node(node).id;
            auto it = strategy.positions.find(id);
            if (it == strategy.positions.end())
                throw std::invalid_argument("evaluate_strategy: no position at node '" + id + "'");
            for (const Increment& inc : tree.increments(node)) {
                const double w = wealth[node] + it->second.dot(inc.delta);
                if (w < -1e-12)
                    throw std::invalid_argument("evaluate_strategy: inadmissible, wealth " +
                                                std::to_string(w) + " at node '" +
                                                tree.node(inc.child).id + "'");
                wealth[inc.child] = w;
            }
        }
    }
    double expected = 0.0;
    for (int leaf : tree.leaves())
        expected += tree.path_prob(leaf) * utility.eval(std::max(wealth[leaf], 0.0), tree.node(leaf).id);
    return expected;
}

GrowthPropagationReport check_growth_propagation(const ScenarioTree& tree,
                                                 const ValueFunctionTable& tables,
                                                 const GrowthCertificate& lifted,
                                                 const std::vector<double>& lambda_grid,
                                                 int x_points) {
    if (!lifted.C_lifted)
        throw std::invalid_argument("check_growth_propagation: certificate must be lifted first");
    GrowthPropagationReport report;
    report.worst_slack = std::numeric_limits<double>::infinity();

    // E[C_lifted | node] via leaf-conditional probabilities
    std::vector<double> cbar(tree.size(), 0.0);
    for (int i = tree.size() - 1; i >= 0; --i) {
        const TreeNode& n = tree.node(i);
        if (n.is_leaf()) {
            cbar[i] = lifted.C_lifted->at(n.id);
        } else {
            double acc = 0.0;
            for (const Increment& inc : tree.increments(i))
                acc += inc.prob * cbar[inc.child];
            cbar[i] = acc;
        }
    }
    // plus E[(next layer at 0)^- | node] for internal nodes
    std::vector<double> shift(tree.size(), 0.0);
    for (int i = 0; i < tree.size(); ++i) {
        const TreeNode& n = tree.node(i);
        if (n.is_leaf()) continue;
        double acc = 0.0;
        for (const Increment& inc : tree.increments(i))
            acc += inc.prob * std::max(-tables.at(tree.node(inc.child).id).eval(0.0), 0.0);
        shift[i] = acc;
    }

    const double lambda_max = *std::max_element(lambda_grid.begin(), lambda_grid.end());
    for (int i = 0; i < tree.size(); ++i) {
        const TreeNode& n = tree.node(i);
        const ValueCurve& curve = tables.at(n.id);
        const double c_node = cbar[i] + shift[i];
        const double x_hi = curve.max_wealth() / lambda_max;
        for (double lambda : lambda_grid) {
            const double lg = std::pow(lambda, lifted.gamma_bar);
            for (int p = 0; p < x_points; ++p) {
                const double x = x_hi * p / (x_points - 1);
                const double lhs = std::max(curve.eval(lambda * x), 0.0);
                const double rhs = lg * std::max(curve.eval(x), 0.0) + lg * c_node;
                const double slack = rhs - lhs;
                if (slack < report.worst_slack) {
                    report.worst_slack = slack;
                    report.worst_node = n.id;
                    report.worst_lambda = lambda;
                    report.worst_x = x;
                }
                if (slack < -1e-6) report.pass = false;
            }
        }
    }
    return report;
}

std::string artifact_to_json(const ScenarioTree& tree, const DpResult& dp,
                             const ForwardPlan& plan, const std::optional<BoundTable>& bounds,
                             std::uint64_t seed) {
    nlohmann::json doc;
    doc["v_star"] = dp.v_star;
    doc["x0"] = dp.x0;
    doc["seed"] = seed;
    doc["policy"] = nlohmann::json::object();
    for (const auto& [id, node] : plan.nodes) {
        nlohmann::json jn;
        jn["wealth"] = node.wealth;
        jn["position"] =
            std::vector<double>(node.position.data(), node.position.data() + node.position.size());
        doc["policy"][id] = std::move(jn);
    }
    if (bounds) {
        const double j0 = bounds->J.at(tree.node(tree.root()).id);
        doc["bounds"]["J0_expect"] = j0;
        doc["bounds"]["upper"] = (1.0 + std::pow(dp.x0, bounds->gamma_bar)) * j0;
    } else {
        doc["bounds"] = nullptr;
    }
    return doc.dump(2);
}

std::string tables_to_json(const ScenarioTree& tree, const ValueFunctionTable& values,
                           const PolicyTable& policy) {
    nlohmann::json doc;
    doc["assets"] = tree.asset_count();
    doc["horizon"] = tree.horizon();
    doc["nodes"] = nlohmann::json::object();
    for (int i = 0; i < tree.size(); ++i) {
        const TreeNode& n = tree.node(i);
        const ValueCurve& curve = values.at(n.id);
        nlohmann::json jn;
        jn["time"] = n.time;
        jn["wealth"] = curve.wealth();
        jn["value"] = curve.values();
        jn["policy"] = nlohmann::json::array();
        auto it = policy.positions.find(n.id);
        if (it != policy.positions.end()) {
            for (const Vec& xi : it->second)
                jn["policy"].push_back(std::vector<double>(xi.data(), xi.data() + xi.size()));
        }
        doc["nodes"][n.id] = std::move(jn);
    }
    return doc.dump(2);
}

std::string tables_json_to_csv(const std::string& tables_json, int layer) {
    const nlohmann::json doc = nlohmann::json::parse(tables_json);
    const int d = doc.at("assets").get<int>();

    struct Row {
        int t;
        std::string node;
        double wealth;
        double value;
        std::vector<double> xi;
    };
    std::vector<Row> rows;
    for (const auto& [id, jn] : doc.at("nodes").items()) {
        const int t = jn.at("time").get<int>();
        if (layer >= 0 && t != layer) continue;
        const auto wealth = jn.at("wealth").get<std::vector<double>>();
        const auto value = jn.at("value").get<std::vector<double>>();
        const auto& policy = jn.at("policy");
        for (std::size_t p = 0; p < wealth.size(); ++p) {
            Row row{t, id, wealth[p], value[p], std::vector<double>(d, 0.0)};
            if (p < policy.size()) row.xi = policy[p].get<std::vector<double>>();
            rows.push_back(std::move(row));
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.node != b.node) return a.node < b.node;
        return a.wealth < b.wealth;
    });

    std::ostringstream os;
    os << "t,node,wealth,value";
    for (int j = 1; j <= d; ++j) os << ",xi_" << j;
    os << "\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        os << buf;
    };
    for (const Row& row : rows) {
        os << row.t << "," << row.node << ",";
        num(row.wealth);
        os << ",";
        num(row.value);
        for (int j = 0; j < d; ++j) {
            os << ",";
            num(j < static_cast<int>(row.xi.size()) ? row.xi[j] : 0.0);
        }
        os << "\n";
    }
    return os.str();
}

} // namespace ncdp
