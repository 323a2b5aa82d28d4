#include "ncdp/arbitrage.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include <json.hpp>

namespace ncdp {

namespace {

// Supporting hyperplane of conv(points) in R^k through a k-subset of points:
// unit normal n with <n, z_i> <= offset for all i. Offset is the distance of
// the hyperplane from the origin when positive.
struct Facet {
    Vec normal;
    double offset = 0.0;
};

std::vector<Facet> supporting_facets(const std::vector<Vec>& pts) {
    const int k = static_cast<int>(pts.front().size());
    const int m = static_cast<int>(pts.size());
    std::vector<Facet> facets;

    // Records the support values along +-n; the minimum over all recorded
    // offsets equals the inradius because every facet normal is generated by
    // one of its defining point subsets.
    auto record_direction = [&](Vec n) {
        const double norm = n.norm();
        if (norm < 1e-14) return;
        n /= norm;
        double hi = -std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        for (const Vec& p : pts) {
            const double s = n.dot(p);
            hi = std::max(hi, s);
            lo = std::min(lo, s);
        }
        facets.push_back({n, hi});
        facets.push_back({-n, -lo});
    };

    if (k == 1) {
        Vec n(1);
        n << 1.0;
        record_direction(n);
        return facets;
    }

    std::vector<int> subset(k);
    // Enumerate k-subsets; each affinely independent one spans a hyperplane
    // whose unit normal is the null vector of the difference matrix.
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == k) {
            Eigen::MatrixXd diffs(k - 1, k);
            for (int j = 1; j < k; ++j)
                diffs.row(j - 1) = (pts[subset[j]] - pts[subset[0]]).transpose();
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs, Eigen::ComputeFullV);
            const auto& sv = svd.singularValues(); // k-1 values
            if (!(sv(0) > 0.0) || sv(k - 2) <= 1e-10 * sv(0))
                return; // affinely dependent subset
            record_direction(svd.matrixV().col(k - 1));
            return;
        }
        for (int i = start; i <= static_cast<int>(pts.size()) - (k - depth); ++i) {
            subset[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    // Cap the combinatorial work; beyond it callers fall back to sampling.
    double combos = 1.0;
    for (int j = 0; j < k; ++j) combos *= static_cast<double>(m - j) / (j + 1);
    if (combos <= 2.0e5) rec(0, 0);
    return facets;
}

// min over unit directions of max_i <u, z_i> by seeded sampling with local
// contraction. Used only when facet enumeration is not affordable; the
// result is deflated by the caller to stay on the safe side.
std::pair<double, Vec> sampled_support_min(const std::vector<Vec>& pts, std::uint64_t seed) {
    const int k = static_cast<int>(pts.front().size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto support = [&](const Vec& u) {
        double h = -std::numeric_limits<double>::infinity();
        for (const Vec& p : pts) h = std::max(h, u.dot(p));
        return h;
    };
    Vec best = Vec::Zero(k);
    best(0) = 1.0;
    double best_h = support(best);
    for (int i = 0; i < 4096; ++i) {
        Vec u(k);
        for (int j = 0; j < k; ++j) u(j) = gauss(rng);
        if (u.norm() < 1e-12) continue;
        u /= u.norm();
        const double h = support(u);
        if (h < best_h) {
            best_h = h;
            best = u;
        }
    }
    for (double sigma = 0.5; sigma > 1e-4; sigma *= 0.5) {
        for (int i = 0; i < 512; ++i) {
            Vec u = best;
            for (int j = 0; j < k; ++j) u(j) += sigma * gauss(rng);
            if (u.norm() < 1e-12) continue;
            u /= u.norm();
            const double h = support(u);
            if (h < best_h) {
                best_h = h;
                best = u;
            }
        }
    }
    return {best_h, best};
}

} // namespace

const NodeCertificate& TreeCertificate::at(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end())
        throw std::invalid_argument("certificate: missing entry for node '" + id + "'");
    return it->second;
}

CertifyOutcome certify_node(const std::vector<Increment>& incs) {
    if (incs.empty()) throw std::invalid_argument("certify_node: no increments");
    for (const Increment& inc : incs)
        if (!(inc.prob > 0.0)) throw std::invalid_argument("certify_node: nonpositive probability");

    const AffineHull hull = support_hull_basis(incs);
    const int k = hull.basis.dim();
    double kappa = 1.0;
    for (const Increment& inc : incs) kappa = std::min(kappa, inc.prob);

    auto make_witness = [&](const Vec& direction) {
        ArbitrageWitness w;
        w.direction = direction;
        w.payoffs.reserve(incs.size());
        for (const Increment& inc : incs) w.payoffs.push_back(direction.dot(inc.delta));
        return w;
    };

    if (!hull.is_linear) {
        // The hull misses the origin entirely; the foot of the perpendicular
        // from 0 to the hull pays ||p||^2 > 0 against every support point.
        Vec p = incs.front().delta - project(incs.front().delta, hull.basis);
        return make_witness(Vec(p / p.norm()));
    }
    if (k == 0) {
        // All moves are zero: the defining inequality quantifies over an
        // empty set of directions, so (beta, kappa) = (1, 1) by convention.
        NodeCertificate cert;
        cert.basis = hull.basis;
        cert.beta = 1.0;
        cert.kappa = kappa;
        return cert;
    }

    std::vector<Vec> coords;
    coords.reserve(incs.size());
    double scale = 0.0;
    for (const Increment& inc : incs) {
        coords.push_back(hull.basis.coords(inc.delta));
        scale = std::max(scale, coords.back().norm());
    }
    const double tol_na = 1e-9 * scale;

    double inradius;
    Vec worst_normal;
    if (k == 1) {
        double up = -std::numeric_limits<double>::infinity();
        double down = -std::numeric_limits<double>::infinity();
        for (const Vec& z : coords) {
            up = std::max(up, z(0));
            down = std::max(down, -z(0));
        }
        inradius = std::min(up, down);
        worst_normal = Vec::Ones(1);
        if (down < up) worst_normal(0) = -1.0;
    } else {
        const std::vector<Facet> facets = supporting_facets(coords);
        if (!facets.empty()) {
            inradius = std::numeric_limits<double>::infinity();
            for (const Facet& f : facets) {
                if (f.offset < inradius) {
                    inradius = f.offset;
                    worst_normal = f.normal;
                }
            }
        } else {
            auto [h, u] = sampled_support_min(coords, 0x5eedULL + 31 * k);
            inradius = 0.9 * h; // sampled bound, deflated to stay conservative
            worst_normal = u;
        }
    }

    if (!(inradius > tol_na)) {
        // 0 is not interior: the outward normal of the touching facet
        // separates, so trading against it never loses.
        return make_witness(Vec(-hull.basis.embed(worst_normal)));
    }

    NodeCertificate cert;
    cert.basis = hull.basis;
    cert.beta = inradius;
    cert.kappa = kappa;
    return cert;
}

VerifyReport verify_certificate(const std::vector<Increment>& incs, const NodeCertificate& cert,
                                int n_dirs, std::uint64_t seed) {
    if (n_dirs <= 0) throw std::invalid_argument("verify_certificate: n_dirs must be positive");
    if (incs.empty()) throw std::invalid_argument("verify_certificate: no increments");
    if (cert.basis.dim() > 0 &&
        cert.basis.ambient_dim() != static_cast<int>(incs.front().delta.size()))
        throw std::invalid_argument("verify_certificate: basis/increment dimension mismatch");
    const AffineHull hull = support_hull_basis(incs);
    if (hull.basis.dim() != cert.basis.dim())
        throw std::invalid_argument("verify_certificate: certificate dimension differs from the node's subspace");
    if (hull.basis.dim() > 0) {
        const Eigen::MatrixXd gap =
            hull.basis.vectors * hull.basis.vectors.transpose() -
            cert.basis.vectors * cert.basis.vectors.transpose();
        if (gap.cwiseAbs().maxCoeff() > 1e-8)
            throw std::invalid_argument("verify_certificate: certificate basis spans a different subspace");
    }

    VerifyReport report;
    const int k = cert.basis.dim();
    if (k == 0) return report; // no unit directions exist in {0}

    std::vector<Vec> coords;
    double scale = 0.0;
    for (const Increment& inc : incs) {
        coords.push_back(cert.basis.coords(inc.delta));
        scale = std::max(scale, coords.back().norm());
    }
    const double slack = 1e-9 * scale; // numerical slack for the <= -beta test

    std::vector<Vec> dirs;
    if (k == 1) {
        dirs.push_back(Vec::Ones(1));
        dirs.push_back(-Vec::Ones(1));
    } else {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        dirs.reserve(n_dirs);
        while (static_cast<int>(dirs.size()) < n_dirs) {
            Vec u(k);
            for (int j = 0; j < k; ++j) u(j) = gauss(rng);
            const double norm = u.norm();
            if (norm < 1e-12) continue;
            dirs.push_back(u / norm);
        }
    }
    if (k >= 2 && k <= 3)
        for (const Facet& f : supporting_facets(coords)) dirs.push_back(f.normal);

    report.worst_mass_margin = std::numeric_limits<double>::infinity();
    report.worst_beta_margin = std::numeric_limits<double>::infinity();
    for (const Vec& u : dirs) {
        double mass = 0.0;
        double deepest = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < coords.size(); ++i) {
            const double pay = u.dot(coords[i]);
            if (pay <= -cert.beta + slack) mass += incs[i].prob;
            deepest = std::max(deepest, -pay);
        }
        ++report.directions_checked;
        const double mass_margin = mass - cert.kappa;
        if (mass_margin < report.worst_mass_margin) {
            report.worst_mass_margin = mass_margin;
            report.worst_direction = cert.basis.embed(u);
        }
        report.worst_beta_margin = std::min(report.worst_beta_margin, deepest - cert.beta);
        if (mass_margin < 0.0) report.pass = false;
    }
    return report;
}

TreeCertificate certify_tree(const ScenarioTree& tree) {
    TreeCertificate cert;
    for (int idx : tree.internal_nodes()) {
        CertifyOutcome outcome = certify_node(tree.increments(idx));
        if (std::holds_alternative<ArbitrageWitness>(outcome)) {
            ArbitrageWitness w = std::get<ArbitrageWitness>(std::move(outcome));
            w.node = tree.node(idx).id;
            cert.nodes.clear();
            cert.witness = std::move(w);
            return cert;
        }
        NodeCertificate nc = std::get<NodeCertificate>(std::move(outcome));
        nc.node = tree.node(idx).id;
        cert.nodes.emplace(nc.node, std::move(nc));
    }
    return cert;
}

std::vector<double> wealth_bounds(const ScenarioTree& tree, double x0, const TreeCertificate& cert) {
    if (x0 < 0.0) throw std::invalid_argument("wealth_bounds: x0 must be nonnegative");
    std::vector<double> bound(tree.size(), 0.0);
    bound[tree.root()] = x0;
    for (int t = 0; t < tree.horizon(); ++t) {
        for (int idx : tree.layer(t)) {
            const NodeCertificate& nc = cert.at(tree.node(idx).id);
            double worst = 0.0;
            for (const Increment& inc : tree.increments(idx))
                worst = std::max(worst, inc.delta.norm());
            const double factor = 1.0 + worst / nc.beta;
            for (int c : tree.node(idx).children) bound[c] = bound[idx] * factor;
        }
    }
    return bound;
}

std::string certificate_to_json(const TreeCertificate& cert) {
    nlohmann::json doc;
    if (cert.witness) {
        doc["witness"]["node"] = cert.witness->node;
        doc["witness"]["direction"] = std::vector<double>(
            cert.witness->direction.data(),
            cert.witness->direction.data() + cert.witness->direction.size());
    } else {
        doc["nodes"] = nlohmann::json::object();
        for (const auto& [id, nc] : cert.nodes) {
            nlohmann::json jn;
            jn["beta"] = nc.beta;
            jn["kappa"] = nc.kappa;
            jn["dim"] = nc.basis.dim();
            jn["basis"] = nlohmann::json::array();
            for (int c = 0; c < nc.basis.dim(); ++c) {
                const Vec col = nc.basis.vectors.col(c);
                jn["basis"].push_back(std::vector<double>(col.data(), col.data() + col.size()));
            }
            doc["nodes"][id] = std::move(jn);
        }
    }
    return doc.dump(2);
}

} // namespace ncdp
