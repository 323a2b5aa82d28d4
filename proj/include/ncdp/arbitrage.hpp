#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ncdp/scenario_tree.hpp"
#include "ncdp/subspace.hpp"

namespace ncdp {

/// Quantitative no-arbitrage data at one internal node: every unit direction
/// u in the spanned subspace loses at least beta with conditional probability
/// at least kappa over the child moves.
struct NodeCertificate {
    std::string node;
    SubspaceBasis basis; // basis of the move subspace D at the node
    double beta = 1.0;   // inradius of the child-move convex hull around 0 within D
    double kappa = 1.0;  // minimum child probability
};

/// One-step riskless-profit direction: every child payoff <\xi, dS> is
/// nonnegative and at least one child of positive probability pays strictly.
struct ArbitrageWitness {
    std::string node;
    Vec direction; // unit vector
    std::vector<double> payoffs; // <direction, delta_i> per child, in child order
};

/// Either a certificate for every internal node or the first witness found
/// (nodes visited breadth-first, ids sorted within a layer).
struct TreeCertificate {
    std::map<std::string, NodeCertificate> nodes;
    std::optional<ArbitrageWitness> witness;

    bool no_arbitrage() const { return !witness.has_value(); }
    const NodeCertificate& at(const std::string& id) const;
};

/// Thrown by consumers that refuse to run on a market with arbitrage.
class ArbitrageError : public std::runtime_error {
public:
    ArbitrageError(std::string node, std::string what)
        : std::runtime_error(std::move(what)), node_(std::move(node)) {}
    const std::string& node() const { return node_; }

private:
    std::string node_;
};

using CertifyOutcome = std::variant<NodeCertificate, ArbitrageWitness>;

/// Decides one-step no-arbitrage at a node: the origin must lie in the
/// relative interior of the convex hull of the child moves within D. On
/// success beta is the largest D-ball radius around 0 inside that hull and
/// kappa the minimum child probability; on failure the separating direction
/// is returned.
CertifyOutcome certify_node(const std::vector<Increment>& incs);

struct VerifyReport {
    bool pass = true;
    int directions_checked = 0;
    double worst_mass_margin = 1.0; // min over directions of (qualifying mass - kappa)
    double worst_beta_margin = 0.0; // min over directions of (max_i -<u,d_i> - beta)
    Vec worst_direction;            // direction attaining worst_mass_margin
};

/// Spot-checks the certificate inequality on unit directions in D:
/// exhaustive +-basis when dim D = 1, seeded uniform sphere samples
/// otherwise, plus every supporting-facet normal when dim D <= 3.
VerifyReport verify_certificate(const std::vector<Increment>& incs, const NodeCertificate& cert,
                                int n_dirs, std::uint64_t seed = 20240901ULL);

/// Certifies every internal node or returns the first witness.
TreeCertificate certify_tree(const ScenarioTree& tree);

/// Per-node reachable-wealth caps from initial wealth x0:
///   W(root) = x0,  W(child) = W(node) * (1 + max_i ||delta_i|| / beta(node)).
/// Indexed like the tree's nodes. Throws when a node certificate is missing.
std::vector<double> wealth_bounds(const ScenarioTree& tree, double x0, const TreeCertificate& cert);

/// JSON export:
///   {"nodes": {id: {"beta": b, "kappa": k, "dim": k, "basis": [[..]]}}}
/// or {"witness": {"node": id, "direction": [..]}}.
std::string certificate_to_json(const TreeCertificate& cert);

} // namespace ncdp
