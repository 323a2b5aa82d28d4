#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ncdp {

using Vec = Eigen::VectorXd;

/// One atom of the information flow at a fixed date. Children carry the
/// conditional law of the next price move given this node.
struct TreeNode {
    std::string id;
    int time = 0;
    int parent = -1;          // index into ScenarioTree::node(), -1 for the root
    Vec price;                // length d, finite entries
    double cond_prob = 1.0;   // probability given the parent, in (0,1]
    std::vector<int> children;

    bool is_leaf() const { return children.empty(); }
};

/// One child transition of an internal node.
struct Increment {
    int child = -1;    // node index of the child
    double prob = 0.0; // conditional probability
    Vec delta;         // child price minus node price
};

/// Finite event tree over dates 0..T with d risky assets priced on every node.
///
/// Nodes are stored in breadth-first order (layer by layer, ids sorted within
/// a layer), so index order is deterministic for any given input.
class ScenarioTree {
public:
    ScenarioTree(int asset_count, int horizon, std::vector<TreeNode> nodes);

    int asset_count() const { return asset_count_; }
    int horizon() const { return horizon_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    int root() const { return 0; }

    const TreeNode& node(int index) const { return nodes_.at(index); }
    int index_of(const std::string& id) const;
    bool has_node(const std::string& id) const { return index_.count(id) > 0; }

    /// Unconditional probability of reaching the node (product along the path).
    double path_prob(int index) const { return path_prob_.at(index); }

    /// Node indices at a given date, in id order.
    const std::vector<int>& layer(int time) const { return layers_.at(time); }

    /// Internal (non-leaf) node indices in breadth-first order.
    std::vector<int> internal_nodes() const;
    std::vector<int> leaves() const;

    /// Child transitions of an internal node. Throws if the node is a leaf.
    std::vector<Increment> increments(int index) const;

private:
    int asset_count_;
    int horizon_;
    std::vector<TreeNode> nodes_;
    std::map<std::string, int> index_;
    std::vector<double> path_prob_;
    std::vector<std::vector<int>> layers_;

    void validate() const;
};

/// Parses and validates the JSON tree document:
///   {"assets": d, "horizon": T,
///    "nodes": [{"id": "...", "parent": "..."|null, "prob": p, "price": [..]}]}
/// Child probabilities must sum to 1 within 1e-12 per node; they are
/// renormalized exactly after the check.
ScenarioTree load_tree(const std::string& text);

/// Serializes back to the same schema (used by tooling and tests).
std::string dump_tree(const ScenarioTree& tree);

} // namespace ncdp
