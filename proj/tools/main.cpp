#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncdp/dp.hpp"
#include "ncdp/oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitArbitrage = 3;
constexpr int kExitGrowth = 4;
constexpr int kExitComparison = 5;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read file '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write file '" + path + "'");
    out << content;
}

struct Options {
    std::string tree_path;
    std::string utility_path;
    std::string out_dir;
    double x0 = 1.0;
    int n_grid = 256;
    double tol = 1e-4;
    int oracle_grid = 41;
    std::uint64_t seed = 20240901ULL;
    int layer = -1;
};

std::vector<std::string> leaf_ids(const ncdp::ScenarioTree& tree) {
    std::vector<std::string> ids;
    for (int leaf : tree.leaves()) ids.push_back(tree.node(leaf).id);
    return ids;
}

int cmd_validate(const Options& opt) {
    const ncdp::ScenarioTree tree = ncdp::load_tree(read_file(opt.tree_path));
    std::cout << "tree ok: " << tree.size() << " nodes, " << tree.asset_count()
              << " assets, horizon " << tree.horizon() << "\n";
    if (!opt.utility_path.empty()) {
        const ncdp::UtilitySpec spec = ncdp::parse_utility(read_file(opt.utility_path));
        spec.model.check_shape(100.0, leaf_ids(tree));
        std::cout << "utility ok: family " << ncdp::family_name(spec.model.family())
                  << (spec.growth ? ", growth certificate attached" : "") << "\n";
    }
    return kExitOk;
}

int cmd_certify_na(const Options& opt) {
    const ncdp::ScenarioTree tree = ncdp::load_tree(read_file(opt.tree_path));
    const ncdp::TreeCertificate cert = ncdp::certify_tree(tree);
    const std::string doc = ncdp::certificate_to_json(cert);
    if (!opt.out_dir.empty())
        write_file(opt.out_dir + "/certificate.json", doc + "\n");
    else
        std::cout << doc << "\n";
    return cert.no_arbitrage() ? kExitOk : kExitArbitrage;
}

int cmd_certify_utility(const Options& opt) {
    const ncdp::UtilitySpec spec = ncdp::parse_utility(read_file(opt.utility_path));
    if (!spec.growth) throw std::invalid_argument("utility document carries no growth certificate");
    std::vector<std::string> nodes{{}};
    if (!opt.tree_path.empty()) nodes = leaf_ids(ncdp::load_tree(read_file(opt.tree_path)));
    spec.model.check_shape(100.0 * (spec.growth->x_bar + 1.0), nodes);

    nlohmann::json report;
    report["gamma_bar"] = spec.growth->gamma_bar;
    report["x_bar"] = spec.growth->x_bar;
    if (auto cex = ncdp::falsify_growth(spec.model, *spec.growth, ncdp::default_lambda_grid(),
                                        ncdp::default_x_grid(*spec.growth), nodes)) {
        report["pass"] = false;
        report["counterexample"] = {{"lambda", cex->lambda}, {"x", cex->x},
                                    {"node", cex->node},     {"lhs", cex->lhs},
                                    {"rhs", cex->rhs}};
        std::cout << report.dump(2) << "\n";
        return kExitGrowth;
    }
    const ncdp::GrowthCertificate lifted = ncdp::lift_growth(spec.model, *spec.growth, nodes);
    report["pass"] = true;
    report["C_lifted"] = lifted.C_lifted->constant;
    for (const auto& [id, v] : lifted.C_lifted->per_node) report["C_lifted_per_node"][id] = v;
    std::cout << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_optimize(const Options& opt) {
    const ncdp::ScenarioTree tree = ncdp::load_tree(read_file(opt.tree_path));
    const ncdp::UtilitySpec spec = ncdp::parse_utility(read_file(opt.utility_path));
    spec.model.check_shape(100.0, leaf_ids(tree));

    const ncdp::TreeCertificate cert = ncdp::certify_tree(tree);
    if (!cert.no_arbitrage()) {
        std::cerr << "arbitrage at node '" << cert.witness->node << "', refusing to optimize\n";
        if (!opt.out_dir.empty())
            write_file(opt.out_dir + "/certificate.json", ncdp::certificate_to_json(cert) + "\n");
        return kExitArbitrage;
    }

    ncdp::GridConfig grid;
    grid.n_grid = opt.n_grid;
    const ncdp::DpResult dp =
        ncdp::backward_induct(tree, spec.model, spec.growth, cert, opt.x0, grid, opt.tol);
    const ncdp::ForwardPlan plan = ncdp::assemble_strategy(tree, spec.model, cert, dp, opt.tol);

    std::optional<ncdp::BoundTable> bounds;
    if (spec.growth && spec.growth->x_bar > 0.0)
        bounds = ncdp::compute_J(tree, *spec.growth, cert, spec.model);
    else if (spec.growth)
        std::cerr << "note: x_bar = 0, polynomial value bound skipped\n";

    const std::string artifact = ncdp::artifact_to_json(tree, dp, plan, bounds, opt.seed);
    const std::string tables = ncdp::tables_to_json(tree, dp.values, dp.policy);
    const std::string out = opt.out_dir.empty() ? std::string("out") : opt.out_dir;
    write_file(out + "/artifact.json", artifact + "\n");
    write_file(out + "/tables.json", tables + "\n");
    std::cout << "v_star " << dp.v_star << "\n";
    if (bounds) {
        const double j0 = bounds->J.at(tree.node(tree.root()).id);
        std::cout << "upper_bound " << (1.0 + std::pow(opt.x0, bounds->gamma_bar)) * j0 << "\n";
    }
    return kExitOk;
}

int cmd_oracle(const Options& opt) {
    const ncdp::ScenarioTree tree = ncdp::load_tree(read_file(opt.tree_path));
    const ncdp::UtilitySpec spec = ncdp::parse_utility(read_file(opt.utility_path));
    const ncdp::TreeCertificate cert = ncdp::certify_tree(tree);
    if (!cert.no_arbitrage()) {
        std::cerr << "arbitrage at node '" << cert.witness->node << "'\n";
        return kExitArbitrage;
    }
    ncdp::GridConfig grid;
    grid.n_grid = opt.n_grid;
    const ncdp::DpResult dp =
        ncdp::backward_induct(tree, spec.model, spec.growth, cert, opt.x0, grid, opt.tol);

    ncdp::OracleReport report =
        ncdp::brute_force_value(tree, spec.model, opt.x0, opt.oracle_grid, cert);
    ncdp::compare_with_dp(report, dp.v_star, 2e-2);

    nlohmann::json doc;
    doc["oracle_value"] = report.best_value;
    doc["dp_value"] = dp.v_star;
    doc["gap"] = report.gap;
    doc["pass"] = report.pass;
    doc["boundary_flag"] = report.boundary_flag;
    std::cout << doc.dump(2) << "\n";
    return report.pass ? kExitOk : kExitComparison;
}

int cmd_elasticity(const Options& opt) {
    const ncdp::UtilitySpec spec = ncdp::parse_utility(read_file(opt.utility_path));
    std::ostringstream os;
    os << "x,elasticity\n";
    char buf[64];
    for (int n = 1; n <= 40; ++n) {
        const double x = n + 0.5;
        try {
            const double e = ncdp::empirical_elasticity(spec.model, {}, x, 1e-4);
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", x, e);
            os << buf;
        } catch (const std::invalid_argument&) {
            // u(x) = 0: elasticity undefined here
        }
    }
    if (!opt.out_dir.empty())
        write_file(opt.out_dir + "/elasticity.csv", os.str());
    else
        std::cout << os.str();
    return kExitOk;
}

int cmd_export(const Options& opt) {
    const std::string out = opt.out_dir.empty() ? std::string("out") : opt.out_dir;
    const std::string tables = read_file(out + "/tables.json");
    write_file(out + "/curves.csv", ncdp::tables_json_to_csv(tables, opt.layer));
    std::cout << "wrote " << out << "/curves.csv\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"expected-utility portfolio optimization on scenario trees"};
    app.set_config("--config");
    app.require_subcommand(1);

    Options opt;
    app.add_option("--tree", opt.tree_path, "scenario tree JSON");
    app.add_option("--utility", opt.utility_path, "utility JSON");
    app.add_option("--x0", opt.x0, "initial wealth")->check(CLI::NonNegativeNumber);
    app.add_option("--n-grid", opt.n_grid, "wealth grid points per node")
        ->check(CLI::Range(16, 1 << 20));
    app.add_option("--tol", opt.tol, "one-step optimizer tolerance")
        ->check(CLI::PositiveNumber);
    app.add_option("--oracle-grid", opt.oracle_grid, "oracle grid points per axis")
        ->check(CLI::Range(3, 1 << 20));
    app.add_option("--seed", opt.seed, "seed for sampled verification");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--layer", opt.layer, "restrict export to one time layer");

    auto* validate = app.add_subcommand("validate", "check documents against their schemas");
    auto* certify_na = app.add_subcommand("certify-na", "no-arbitrage certificate or witness");
    auto* certify_utility =
        app.add_subcommand("certify-utility", "falsify and lift the growth certificate");
    auto* optimize = app.add_subcommand("optimize", "run the dynamic program");
    auto* oracle = app.add_subcommand("oracle", "brute-force strategy search and comparison");
    auto* elasticity = app.add_subcommand("elasticity", "empirical elasticity table");
    auto* exporter = app.add_subcommand("export", "value curves of a prior run as CSV");
    for (CLI::App* sub :
         {validate, certify_na, certify_utility, optimize, oracle, elasticity, exporter})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(opt);
        if (certify_na->parsed()) return cmd_certify_na(opt);
        if (certify_utility->parsed()) return cmd_certify_utility(opt);
        if (optimize->parsed()) return cmd_optimize(opt);
        if (oracle->parsed()) return cmd_oracle(opt);
        if (elasticity->parsed()) return cmd_elasticity(opt);
        if (exporter->parsed()) return cmd_export(opt);
    } catch (const ncdp::ArbitrageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitArbitrage;
    } catch (const ncdp::GrowthFalsifiedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGrowth;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
