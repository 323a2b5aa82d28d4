#include "ncdp/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace ncdp {

namespace {

constexpr double kProbSumTol = 1e-12;

} // namespace

ScenarioTree::ScenarioTree(int asset_count, int horizon, std::vector<TreeNode> nodes)
    : asset_count_(asset_count), horizon_(horizon), nodes_(std::move(nodes)) {
    if (asset_count_ <= 0) throw std::invalid_argument("tree: asset count must be positive");
    if (horizon_ <= 0) throw std::invalid_argument("tree: horizon must be positive");
    for (int i = 0; i < size(); ++i) {
        if (!index_.emplace(nodes_[i].id, i).second)
            throw std::invalid_argument("tree: duplicate node id '" + nodes_[i].id + "'");
    }
    validate();

    path_prob_.resize(nodes_.size());
    layers_.assign(horizon_ + 1, {});
    for (int i = 0; i < size(); ++i) {
        const TreeNode& n = nodes_[i];
        path_prob_[i] = n.parent < 0 ? 1.0 : path_prob_[n.parent] * n.cond_prob;
        if (path_prob_[i] <= 0.0 || path_prob_[i] > 1.0 + kProbSumTol)
            throw std::invalid_argument("tree: path probability of '" + n.id + "' outside (0,1]");
        layers_[n.time].push_back(i);
    }
}

void ScenarioTree::validate() const {
    int roots = 0;
    for (int i = 0; i < size(); ++i) {
        const TreeNode& n = nodes_[i];
        if (n.id.empty()) throw std::invalid_argument("tree: empty node id");
        if (n.price.size() != asset_count_)
            throw std::invalid_argument("tree: node '" + n.id + "' price has wrong length");
        if (!n.price.allFinite())
            throw std::invalid_argument("tree: node '" + n.id + "' has a non-finite price");
        if (n.parent < 0) {
            ++roots;
            if (n.time != 0) throw std::invalid_argument("tree: root must sit at time 0");
            if (std::abs(n.cond_prob - 1.0) > kProbSumTol)
                throw std::invalid_argument("tree: root probability must be 1");
        } else {
            if (n.parent >= size())
                throw std::invalid_argument("tree: node '" + n.id + "' has a dangling parent");
            if (n.time != nodes_[n.parent].time + 1)
                throw std::invalid_argument("tree: node '" + n.id + "' time differs from parent time + 1");
            if (!(n.cond_prob > 0.0) || n.cond_prob > 1.0 + kProbSumTol)
                throw std::invalid_argument("tree: node '" + n.id + "' probability outside (0,1]");
        }
        if (n.is_leaf() && n.time != horizon_)
            throw std::invalid_argument("tree: leaf '" + n.id + "' at time " +
                                        std::to_string(n.time) + ", expected " +
                                        std::to_string(horizon_));
        if (!n.is_leaf() && n.time >= horizon_)
            throw std::invalid_argument("tree: internal node '" + n.id + "' at terminal time");
        double sum = 0.0;
        for (int c : n.children) sum += nodes_.at(c).cond_prob;
        if (!n.is_leaf() && std::abs(sum - 1.0) > kProbSumTol)
            throw std::invalid_argument("tree: child probabilities of '" + n.id +
                                        "' sum to " + std::to_string(sum));
    }
    if (roots != 1) throw std::invalid_argument("tree: expected exactly one root");
}

int ScenarioTree::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::invalid_argument("tree: unknown node id '" + id + "'");
    return it->second;
}

std::vector<int> ScenarioTree::internal_nodes() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (!nodes_[i].is_leaf()) out.push_back(i);
    return out;
}

std::vector<int> ScenarioTree::leaves() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
        if (nodes_[i].is_leaf()) out.push_back(i);
    return out;
}

std::vector<Increment> ScenarioTree::increments(int index) const {
    const TreeNode& n = node(index);
    if (n.is_leaf()) throw std::invalid_argument("tree: increments requested at leaf '" + n.id + "'");
    std::vector<Increment> out;
    out.reserve(n.children.size());
    for (int c : n.children)
        out.push_back({c, nodes_[c].cond_prob, nodes_[c].price - n.price});
    return out;
}

namespace {
ScenarioTree load_tree_impl(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    if (!doc.is_object() || !doc.contains("assets") || !doc.contains("horizon") ||
        !doc.contains("nodes") || !doc["nodes"].is_array())
        throw std::invalid_argument("tree: document must carry assets, horizon and nodes");

    const int d = doc["assets"].get<int>();
    const int horizon = doc["horizon"].get<int>();
    if (d <= 0) throw std::invalid_argument("tree: assets must be positive");
    if (horizon <= 0) throw std::invalid_argument("tree: horizon must be positive");

    struct RawNode {
        std::string id, parent;
        bool has_parent = false;
        double prob = 0.0;
        Vec price;
    };
    std::vector<RawNode> raw;
    std::map<std::string, int> by_id;
    for (const auto& jn : doc["nodes"]) {
        RawNode r;
        if (!jn.contains("id") || !jn["id"].is_string())
            throw std::invalid_argument("tree: node without string id");
        r.id = jn["id"].get<std::string>();
        if (r.id.empty()) throw std::invalid_argument("tree: empty node id");
        if (jn.contains("parent") && !jn["parent"].is_null()) {
            r.parent = jn["parent"].get<std::string>();
            r.has_parent = true;
        }
        if (!jn.contains("prob") || !jn["prob"].is_number())
            throw std::invalid_argument("tree: node '" + r.id + "' without prob");
        r.prob = jn["prob"].get<double>();
        if (!jn.contains("price") || !jn["price"].is_array() ||
            static_cast<int>(jn["price"].size()) != d)
            throw std::invalid_argument("tree: node '" + r.id + "' price must be an array of length " +
                                        std::to_string(d));
        r.price.resize(d);
        for (int i = 0; i < d; ++i) {
            if (!jn["price"][i].is_number())
                throw std::invalid_argument("tree: node '" + r.id + "' has a non-numeric price");
            r.price[i] = jn["price"][i].get<double>();
        }
        if (!r.price.allFinite())
            throw std::invalid_argument("tree: node '" + r.id + "' has a non-finite price");
        if (!by_id.emplace(r.id, static_cast<int>(raw.size())).second)
            throw std::invalid_argument("tree: duplicate node id '" + r.id + "'");
        raw.push_back(std::move(r));
    }

    // Children by parent id, in id order for a deterministic layout.
    std::map<std::string, std::vector<int>> children;
    std::string root_id;
    for (int i = 0; i < static_cast<int>(raw.size()); ++i) {
        if (!raw[i].has_parent) {
            if (!root_id.empty()) throw std::invalid_argument("tree: more than one root");
            root_id = raw[i].id;
        } else {
            if (!by_id.count(raw[i].parent))
                throw std::invalid_argument("tree: node '" + raw[i].id +
                                            "' references unknown parent '" + raw[i].parent + "'");
            children[raw[i].parent].push_back(i);
        }
    }
    if (root_id.empty()) throw std::invalid_argument("tree: no root node (parent null)");
    for (auto& [pid, kids] : children) {
        std::sort(kids.begin(), kids.end(),
                  [&](int a, int b) { return raw[a].id < raw[b].id; });
        double sum = 0.0;
        for (int k : kids) {
            if (!(raw[k].prob > 0.0))
                throw std::invalid_argument("tree: node '" + raw[k].id + "' probability must be positive");
            sum += raw[k].prob;
        }
        if (std::abs(sum - 1.0) > kProbSumTol)
            throw std::invalid_argument("tree: child probabilities of '" + pid + "' sum to " +
                                        std::to_string(sum) + ", expected 1");
        for (int k : kids) raw[k].prob /= sum; // exact renormalization after the check
    }

    // Breadth-first placement; unreached raw nodes mean a broken parent chain.
    std::vector<TreeNode> nodes;
    std::vector<int> placed(raw.size(), -1);
    std::vector<int> frontier{by_id[root_id]};
    {
        TreeNode root;
        root.id = root_id;
        root.time = 0;
        root.parent = -1;
        root.price = raw[by_id[root_id]].price;
        root.cond_prob = 1.0;
        if (std::abs(raw[by_id[root_id]].prob - 1.0) > kProbSumTol)
            throw std::invalid_argument("tree: root probability must be 1");
        placed[by_id[root_id]] = 0;
        nodes.push_back(std::move(root));
    }
    for (int t = 0; t < horizon && !frontier.empty(); ++t) {
        std::vector<int> next;
        for (int r : frontier) {
            auto it = children.find(raw[r].id);
            if (it == children.end()) continue;
            for (int k : it->second) {
                TreeNode n;
                n.id = raw[k].id;
                n.time = t + 1;
                n.parent = placed[r];
                n.price = raw[k].price;
                n.cond_prob = raw[k].prob;
                placed[k] = static_cast<int>(nodes.size());
                nodes[n.parent].children.push_back(placed[k]);
                nodes.push_back(std::move(n));
                next.push_back(k);
            }
        }
        frontier = std::move(next);
    }
    for (int i = 0; i < static_cast<int>(raw.size()); ++i)
        if (placed[i] < 0)
            throw std::invalid_argument("tree: node '" + raw[i].id + "' is not reachable from the root");

    return ScenarioTree(d, horizon, std::move(nodes));
}
} // namespace

ScenarioTree load_tree(const std::string& text) {
    try {
        return load_tree_impl(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("tree: ") + e.what());
    }
}

std::string dump_tree(const ScenarioTree& tree) {
    nlohmann::json doc;
    doc["assets"] = tree.asset_count();
    doc["horizon"] = tree.horizon();
    doc["nodes"] = nlohmann::json::array();
    for (int i = 0; i < tree.size(); ++i) {
        const TreeNode& n = tree.node(i);
        nlohmann::json jn;
        jn["id"] = n.id;
        if (n.parent < 0)
            jn["parent"] = nullptr;
        else
            jn["parent"] = tree.node(n.parent).id;
        jn["prob"] = n.cond_prob;
        jn["price"] = std::vector<double>(n.price.data(), n.price.data() + n.price.size());
        doc["nodes"].push_back(std::move(jn));
    }
    return doc.dump(2);
}

} // namespace ncdp
