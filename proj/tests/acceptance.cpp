#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "ncdp/oracle.hpp"

using namespace ncdp;
namespace fs = std::filesystem;

namespace {

// One acceptance criterion: doctest assertions plus a summary line.
struct Criterion {
    int id;
    const char* name;
    bool ok = true;

    Criterion(int id_, const char* name_) : id(id_), name(name_) {}
    void expect(bool cond, const char* what) {
        CHECK_MESSAGE(cond, what);
        ok = ok && cond;
    }
    ~Criterion() {
        std::printf("[acceptance] %2d %-28s %s\n", id, name, ok ? "PASS" : "FAIL");
        std::fflush(stdout);
    }
};

DpResult run_dp(const ScenarioTree& tree, const UtilityModel& u,
                const std::optional<GrowthCertificate>& g, double x0, int n_grid = 256) {
    GridConfig grid;
    grid.n_grid = n_grid;
    return backward_induct(tree, u, g, certify_tree(tree), x0, grid, 1e-4);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("analytic one-period fixture") {
    Criterion c{1, "one-period closed form"};
    const ScenarioTree tree = fixtures::b1();
    const TreeCertificate na = certify_tree(tree);
    const DpResult dp = run_dp(tree, fixtures::sqrt_utility(), fixtures::sqrt_growth(), 1.0);
    c.expect(std::abs(dp.v_star - fixtures::kB1SqrtValue) <= 1e-3, "value within 1e-3");
    const ForwardPlan plan = assemble_strategy(tree, fixtures::sqrt_utility(), na, dp);
    c.expect(std::abs(plan.nodes.at("root").position(0) - 1.0) <= 1e-3, "position within 1e-3");
}

TEST_CASE("analytic two-period fixture") {
    Criterion c{2, "two-period homothety"};
    const ScenarioTree tree = fixtures::b2();
    const DpResult dp = run_dp(tree, fixtures::sqrt_utility(), fixtures::sqrt_growth(), 1.0);
    c.expect(std::abs(dp.v_star - fixtures::kB2SqrtValue) <= 2e-3, "value within 2e-3");
    const double m = 0.75 * std::sqrt(2.0);
    bool proportional = true;
    for (const char* id : {"u", "d"}) {
        const ValueCurve& curve = dp.values.at(id);
        for (int i = 0; i < curve.size(); ++i) {
            const double x = curve.wealth()[i];
            if (x < 0.01) continue;
            proportional =
                proportional && std::abs(curve.values()[i] / (m * std::sqrt(x)) - 1.0) <= 1e-3;
        }
    }
    c.expect(proportional, "mid-layer curves proportional to sqrt within 1e-3");
}

TEST_CASE("non-concave fixture") {
    Criterion c{3, "ramp plateau and tie-break"};
    const ScenarioTree tree = fixtures::b1();
    const TreeCertificate na = certify_tree(tree);
    const DpResult dp = run_dp(tree, fixtures::ramp_utility(), fixtures::ramp_growth(), 1.0);
    c.expect(std::abs(dp.v_star - 0.5) <= 1e-3, "value within 1e-3");
    const ForwardPlan plan = assemble_strategy(tree, fixtures::ramp_utility(), na, dp);
    c.expect(std::abs(plan.nodes.at("root").position(0) - 1.0) <= 1e-3,
             "smallest maximizer of the plateau");
}

TEST_CASE("oracle bracketing on random instances") {
    Criterion c{4, "dp vs oracle on 50 trees"};
    int checked = 0;
    for (std::uint64_t seed = 9000; seed < 9050; ++seed) {
        const fixtures::RandomTree rt = fixtures::random_tree(seed);
        const auto [model, growth] = fixtures::random_pw_utility(seed + 5000);
        const TreeCertificate cert = certify_tree(rt.tree);
        REQUIRE(cert.no_arbitrage());
        const DpResult dp = backward_induct(rt.tree, model, growth, cert, 1.5, GridConfig{96, 1e-4}, 1e-4);
        OracleReport report = brute_force_value(rt.tree, model, 1.5, 21, cert);
        compare_with_dp(report, dp.v_star, 2e-2);
        c.expect(report.pass, "dp within 2e-2 relative of the oracle");
        const ForwardPlan plan = assemble_strategy(rt.tree, model, cert, dp, 1e-4);
        const double replay = evaluate_strategy(rt.tree, plan_to_strategy(plan), model);
        c.expect(std::abs(replay - dp.v_star) <= 2e-2 * std::max(1.0, std::abs(dp.v_star)),
                 "assembled strategy replays the dp value");
        ++checked;
    }
    c.expect(checked == 50, "all 50 instances ran");
}

TEST_CASE("certificate soundness and witness agreement") {
    Criterion c{5, "no-arbitrage certificates"};
    // the certificate inequality on 1e4 sampled directions, zero violations
    bool sound = true;
    for (std::uint64_t seed = 9000; seed < 9050; ++seed) {
        const fixtures::RandomTree rt = fixtures::random_tree(seed);
        const TreeCertificate cert = certify_tree(rt.tree);
        for (int node : rt.tree.internal_nodes()) {
            const VerifyReport report = verify_certificate(
                rt.tree.increments(node), cert.at(rt.tree.node(node).id), 10000, 31 + seed);
            sound = sound && report.pass && report.worst_beta_margin >= -1e-9;
        }
    }
    c.expect(sound, "sampled direction checks have zero violations");

    bool agree = true;
    int witnesses = 0;
    for (std::uint64_t seed = 100; seed < 300; ++seed) {
        const fixtures::RandomTree rt = fixtures::random_tree(seed, seed % 2 == 1);
        const bool certified_clean = certify_tree(rt.tree).no_arbitrage();
        const bool search_clean = !find_arbitrage(rt.tree, 41).has_value();
        agree = agree && (certified_clean == search_clean);
        if (!certified_clean) ++witnesses;
    }
    c.expect(agree, "certification and strategy search agree on 200 trees");
    c.expect(witnesses >= 50, "the ensemble contains genuine free lunches");
}

TEST_CASE("growth bound survives the induction") {
    Criterion c{6, "growth propagation"};
    const ScenarioTree tree = fixtures::b2();
    std::vector<std::string> leaves;
    for (int leaf : tree.leaves()) leaves.push_back(tree.node(leaf).id);
    const GrowthCertificate lifted =
        lift_growth(fixtures::kf_utility(), fixtures::kf_growth(), leaves);
    const DpResult dp = run_dp(tree, fixtures::kf_utility(), fixtures::kf_growth(), 1.0);
    const auto report = check_growth_propagation(tree, dp.values, lifted, default_lambda_grid(), 40);
    c.expect(report.pass && report.worst_slack >= -1e-6,
             "every layer obeys the lifted growth bound on the 6x40 grid");
}

TEST_CASE("polynomial value envelope") {
    Criterion c{7, "value bounds"};
    const ScenarioTree tree = fixtures::b1();
    const TreeCertificate na = certify_tree(tree);
    const BoundTable table = compute_J(tree, fixtures::sqrt_growth(), na, fixtures::sqrt_utility());
    c.expect(table.J.at("u") == 1.0 && table.J.at("d") == 1.0, "terminal envelope is exactly 1");
    const double j0 = 0.5 * (std::sqrt(3.0) + std::sqrt(2.0));
    c.expect(std::abs(table.J.at("root") - j0) <= 1e-9, "root envelope by exact finite sums");
    const DpResult dp = run_dp(tree, fixtures::sqrt_utility(), fixtures::sqrt_growth(), 1.0);
    const BoundCheck check = check_bounds(tree, dp.values, table, 0.5, 1.0, dp.v_star);
    c.expect(check.pass && check.worst_slack >= -1e-6, "curves stay under J (x^g + 1)");
    c.expect(dp.v_star <= 2.0 * j0 + 1e-6, "root value under (1 + x0^g) J0");
}

TEST_CASE("bounded non-concave terminal payoff") {
    Criterion c{8, "unit-slope bounded payoff"};
    bool knots = true;
    for (long long n = 0; n <= 50; ++n) {
        // correctly rounded value of the rational (n-1)/(2(n+1))
        const double expected = static_cast<double>(n - 1) / static_cast<double>(2 * (n + 1));
        knots = knots && kramkov_f(static_cast<double>(n)).first == expected;
    }
    c.expect(knots, "integer knots match the rational values exactly up to 50");

    bool slopes = true;
    for (int n = 0; n <= 50; ++n) {
        const auto d = kramkov_f(n + 0.5).second;
        slopes = slopes && d.has_value() && *d == 1.0;
    }
    c.expect(slopes, "every middle segment has slope one");

    const UtilityModel kf = fixtures::kf_utility();
    bool matches = true;
    int crossing = -1;
    for (int n = 1; n <= 50; ++n) {
        const double x = n + 0.5;
        const double e = empirical_elasticity(kf, {}, x, 1e-5);
        const double predicted = x / kramkov_f(x).first;
        matches = matches && std::abs(e - predicted) <= 1e-3 * std::abs(predicted);
        if (crossing < 0 && e > 100.0) crossing = n;
    }
    c.expect(matches, "elasticity equals (n+1/2)/f(n+1/2) within 1e-3");
    c.expect(std::abs(empirical_elasticity(kf, {}, 1.5, 1e-5) - 18.0) <= 1e-3 * 18.0,
             "elasticity at 1.5 is 18");
    // the ratio first exceeds 100 at n = 48: f -> 1/2 makes it ~ 2(n + 1/2)
    c.expect(crossing == 48, "elasticity crosses 100 at n = 48");

    c.expect(!falsify_growth(kf, fixtures::kf_growth(), default_lambda_grid(),
                             default_x_grid(fixtures::kf_growth()))
                  .has_value(),
             "the (1, 1, 1/2) growth certificate survives falsification");
}

TEST_CASE("degenerate and boundary cases") {
    Criterion c{9, "boundary cases"};
    // zero initial wealth: exact expectation of u(0), no trading
    {
        const ScenarioTree tree = fixtures::b2();
        const TreeCertificate na = certify_tree(tree);
        const DpResult dp = run_dp(tree, fixtures::kf_utility(), fixtures::kf_growth(), 0.0);
        const UtilityModel kf = fixtures::kf_utility();
        std::function<double(int)> expect = [&](int node) -> double {
            if (tree.node(node).is_leaf()) return kf.eval(0.0, tree.node(node).id);
            double acc = 0.0;
            for (const Increment& inc : tree.increments(node)) acc += inc.prob * expect(inc.child);
            return acc;
        };
        c.expect(dp.v_star == expect(tree.root()), "zero-wealth value is the exact expectation");
        const ForwardPlan plan = assemble_strategy(tree, kf, na, dp);
        bool flat = true;
        for (const auto& [id, node] : plan.nodes)
            flat = flat && node.wealth == 0.0 &&
                   (node.position.size() == 0 || node.position.norm() == 0.0);
        c.expect(flat, "all positions and wealths are zero");
    }
    // degenerate market: the curve is the terminal utility passed through
    {
        const ScenarioTree tree = fixtures::deg();
        const DpResult dp = run_dp(tree, fixtures::kf_utility(), fixtures::kf_growth(), 1.0);
        const ValueCurve& root = dp.values.at("root");
        bool passthrough = true;
        for (int i = 0; i < root.size(); ++i)
            passthrough = passthrough &&
                          std::abs(root.values()[i] - fixtures::kf_utility().eval(root.wealth()[i])) <=
                              1e-12;
        c.expect(passthrough, "degenerate value curve equals the terminal utility");
    }
    // arbitrage: the library refuses and the cli exits with 3
    {
        const ScenarioTree tree = fixtures::arb();
        bool refused = false;
        try {
            static_cast<void>(run_dp(tree, fixtures::sqrt_utility(), std::nullopt, 1.0));
        } catch (const ArbitrageError&) {
            refused = true;
        }
        c.expect(refused, "optimizer refuses a market with arbitrage");

        const fs::path dir = fs::temp_directory_path() / "ncdp_accept9";
        fs::create_directories(dir);
        std::ofstream(dir / "arb.json") << fixtures::kArb;
        std::ofstream(dir / "sqrt.json")
            << R"({"family":"power","params":{"exponent":0.5},"growth":{"gamma_bar":0.5,"x_bar":1.0,"c":0.0}})";
        const std::string cmd = std::string(CLI_BIN) + " optimize --tree " +
                                (dir / "arb.json").string() + " --utility " +
                                (dir / "sqrt.json").string() + " --x0 1 > /dev/null 2>&1";
        c.expect(WEXITSTATUS(std::system(cmd.c_str())) == 3, "cli exit code 3 on arbitrage");
        fs::remove_all(dir);
    }
}

TEST_CASE("byte-identical reruns") {
    Criterion c{10, "determinism"};
    const fs::path dir = fs::temp_directory_path() / "ncdp_accept10";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "b1.json") << fixtures::kB1;
    std::ofstream(dir / "sqrt.json")
        << R"({"family":"power","params":{"exponent":0.5},"growth":{"gamma_bar":0.5,"x_bar":1.0,"c":0.0}})";
    auto run = [&](const std::string& out) {
        const std::string cmd = std::string(CLI_BIN) + " optimize --tree " +
                                (dir / "b1.json").string() + " --utility " +
                                (dir / "sqrt.json").string() + " --x0 1 --out " + (dir / out).string() +
                                " > /dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    auto exp = [&](const std::string& out) {
        const std::string cmd = std::string(CLI_BIN) + " export --out " + (dir / out).string() +
                                " > /dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    c.expect(run("a") == 0 && run("b") == 0, "both runs succeed");
    c.expect(slurp(dir / "a/artifact.json") == slurp(dir / "b/artifact.json"),
             "identical run artifacts");
    c.expect(exp("a") == 0 && exp("b") == 0, "both exports succeed");
    c.expect(!slurp(dir / "a/curves.csv").empty() &&
                 slurp(dir / "a/curves.csv") == slurp(dir / "b/curves.csv"),
             "identical curve exports");
    fs::remove_all(dir);
}
