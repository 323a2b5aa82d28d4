#include "ncdp/one_step.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ncdp {

namespace {

constexpr double kFeasTol = 1e-12;

struct Problem {
    double x = 0.0;
    int k = 0;
    std::vector<double> probs;
    std::vector<Vec> z; // moves in basis coordinates
    const std::vector<ChildValue>* children = nullptr;

    bool feasible(const Vec& w) const {
        for (std::size_t i = 0; i < z.size(); ++i)
            if (x + w.dot(z[i]) < -kFeasTol) return false;
        return true;
    }
    double objective(const Vec& w) const {
        double g = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double pay = std::max(x + w.dot(z[i]), 0.0);
            g += probs[i] * (*children)[i].value(pay);
        }
        return g;
    }
};

struct Candidate {
    Vec w;
    double value;
};

class Search {
public:
    explicit Search(const Problem& prob) : prob_(prob) {}

    // Returns the objective at w, or -inf when w is infeasible.
    double try_point(Vec w) {
        if (!prob_.feasible(w)) return -std::numeric_limits<double>::infinity();
        const double v = prob_.objective(w);
        evaluated_.push_back({std::move(w), v});
        if (v > best_value_) {
            best_value_ = v;
            best_index_ = evaluated_.size() - 1;
        }
        return v;
    }

    double best_value() const { return best_value_; }
    const Vec& best_point() const { return evaluated_[best_index_].w; }
    bool empty() const { return evaluated_.empty(); }

    // Lexicographically smallest embedded position among tied maximizers.
    // The tie window is numerical noise, not the accuracy tolerance: a
    // tol-wide window would drag the position away from a strict maximum.
    Vec tie_break(const SubspaceBasis& basis) const {
        const double window = std::max(1e-12, 1e-9 * std::abs(best_value_));
        Vec best = basis.embed(evaluated_[best_index_].w);
        for (const Candidate& c : evaluated_) {
            if (c.value < best_value_ - window) continue;
            Vec xi = basis.embed(c.w);
            for (int j = 0; j < xi.size(); ++j) {
                if (xi(j) < best(j)) {
                    best = xi;
                    break;
                }
                if (xi(j) > best(j)) break;
            }
        }
        return best;
    }

private:
    const Problem& prob_;
    std::vector<Candidate> evaluated_;
    double best_value_ = -std::numeric_limits<double>::infinity();
    std::size_t best_index_ = 0;
};

// Exact feasible interval of t |-> base + t z along one axis direction.
std::pair<double, double> axis_interval(const Problem& prob, const Vec& origin, int axis,
                                        double radius) {
    double lo = -radius, hi = radius;
    for (std::size_t i = 0; i < prob.z.size(); ++i) {
        const double base = prob.x + origin.dot(prob.z[i]) - origin(axis) * prob.z[i](axis);
        const double slope = prob.z[i](axis);
        if (std::abs(slope) < 1e-14 * (1.0 + std::abs(base))) continue;
        const double bound = -base / slope;
        if (slope > 0.0)
            lo = std::max(lo, bound);
        else
            hi = std::min(hi, bound);
    }
    return {lo, hi};
}

void line_search(Search& search, const Problem& prob, const Vec& origin, int axis, double lo,
                 double hi) {
    if (!(hi >= lo)) return;
    Vec w = origin;
    auto at = [&](double t) {
        w(axis) = t;
        search.try_point(w);
    };
    at(lo);
    at(hi);
    if (origin(axis) == 0.0 || (lo <= 0.0 && hi >= 0.0)) at(0.0);
    // kink preimages are exact maximizer candidates of the piecewise objective
    for (std::size_t i = 0; i < prob.z.size(); ++i) {
        const double slope = prob.z[i](axis);
        if (std::abs(slope) < 1e-14) continue;
        const double base = prob.x + origin.dot(prob.z[i]) - origin(axis) * slope;
        for (double kink : (*prob.children)[i].kinks) {
            const double t = (kink - base) / slope;
            if (t > lo && t < hi) at(t);
        }
    }
    double a = lo, b = hi;
    const int points = 65;
    for (int round = 0; round < 7 && b - a > 0.0; ++round) {
        double best_t = a, best_v = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < points; ++j) {
            const double t = a + (b - a) * j / (points - 1);
            w(axis) = t;
            const double v = search.try_point(w);
            if (v > best_v) {
                best_v = v;
                best_t = t;
            }
        }
        const double span = (b - a) / (points - 1);
        a = std::max(lo, best_t - 2.0 * span);
        b = std::min(hi, best_t + 2.0 * span);
        if (span < 1e-13 * std::max(1.0, std::abs(best_t))) break;
    }
}

void box_search(Search& search, const Problem& prob, double radius, double /*tol*/) {
    const int k = prob.k;
    const int per_axis = k == 2 ? 21 : (k == 3 ? 9 : 5);
    const int rounds = k == 2 ? 5 : 4;
    Vec center = Vec::Zero(k);
    double half = radius;
    search.try_point(center);
    for (int round = 0; round < rounds; ++round) {
        Vec best = center;
        double best_v = -std::numeric_limits<double>::infinity();
        std::vector<int> idx(k, 0);
        Vec w(k);
        while (true) {
            for (int j = 0; j < k; ++j)
                w(j) = center(j) - half + 2.0 * half * idx[j] / (per_axis - 1);
            if (w.norm() <= radius * (1.0 + 1e-12)) {
                const double v = search.try_point(w);
                if (v > best_v) {
                    best_v = v;
                    best = w;
                }
            }
            int j = 0;
            while (j < k && ++idx[j] == per_axis) idx[j++] = 0;
            if (j == k) break;
        }
        if (best_v > -std::numeric_limits<double>::infinity()) center = best;
        half = 2.0 * (2.0 * half / (per_axis - 1));
    }
    // polytope vertices: k active child constraints at a time
    const int m = static_cast<int>(prob.z.size());
    if (k <= 3 && m <= 24) {
        std::vector<int> subset(k);
        std::function<void(int, int)> rec = [&](int start, int depth) {
            if (depth == k) {
                Eigen::MatrixXd A(k, k);
                Vec b(k);
                for (int j = 0; j < k; ++j) {
                    A.row(j) = prob.z[subset[j]].transpose();
                    b(j) = -prob.x;
                }
                Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
                if (lu.rank() < k) return;
                Vec w = lu.solve(b);
                if (w.norm() <= radius * (1.0 + 1e-9)) search.try_point(w);
                return;
            }
            for (int i = start; i <= m - (k - depth); ++i) {
                subset[depth] = i;
                rec(i + 1, depth + 1);
            }
        };
        rec(0, 0);
    }
    // coordinate-descent polish from the best point found
    for (int sweep = 0; sweep < 3; ++sweep) {
        if (search.empty()) break;
        Vec origin = search.best_point();
        for (int axis = 0; axis < k; ++axis) {
            auto [lo, hi] = axis_interval(prob, origin, axis, radius);
            line_search(search, prob, origin, axis, lo, hi);
            origin = search.best_point();
        }
    }
}

} // namespace

OneStepSolution maximize_one_step(double wealth, const std::vector<ChildValue>& children,
                                  const NodeCertificate& cert, double tol,
                                  const Vec* warm_start) {
    if (wealth < 0.0) throw std::invalid_argument("one_step: wealth must be nonnegative");
    if (!(tol > 0.0)) throw std::invalid_argument("one_step: tol must be positive");
    if (children.empty()) throw std::invalid_argument("one_step: no children");

    const int d = static_cast<int>(children.front().delta.size());
    const int k = cert.basis.dim();

    OneStepSolution sol;
    sol.position = Vec::Zero(d);

    auto finish = [&](const Vec& position, double value) {
        sol.position = position;
        sol.value = value;
        sol.child_payoffs.clear();
        for (const ChildValue& c : children)
            sol.child_payoffs.push_back(wealth + position.dot(c.delta));
        return sol;
    };

    if (k == 0 || wealth == 0.0) {
        // only the zero position is admissible in D
        double v = 0.0;
        for (const ChildValue& c : children) v += c.prob * c.value(wealth);
        return finish(Vec::Zero(d), v);
    }

    Problem prob;
    prob.x = wealth;
    prob.k = k;
    prob.children = &children;
    for (const ChildValue& c : children) {
        prob.probs.push_back(c.prob);
        prob.z.push_back(cert.basis.coords(c.delta));
    }
    const double radius = wealth / cert.beta;

    Search search(prob);
    if (warm_start != nullptr && warm_start->size() == d)
        search.try_point(cert.basis.coords(*warm_start));
    if (k == 1) {
        Vec origin = Vec::Zero(1);
        auto [lo, hi] = axis_interval(prob, origin, 0, radius);
        line_search(search, prob, origin, 0, lo, hi);
    } else {
        box_search(search, prob, radius, tol);
    }
    if (search.empty()) {
        double v = 0.0;
        for (const ChildValue& c : children) v += c.prob * c.value(wealth);
        return finish(Vec::Zero(d), v);
    }
    const Vec xi = search.tie_break(cert.basis);
    return finish(xi, prob.objective(cert.basis.coords(xi)));
}

OneStepSolution maximize_one_step(double wealth, const std::vector<Increment>& incs,
                                  const std::vector<const ValueCurve*>& child_curves,
                                  const NodeCertificate& cert, double tol) {
    if (incs.size() != child_curves.size())
        throw std::invalid_argument("one_step: one curve per child required");
    std::vector<ChildValue> children;
    children.reserve(incs.size());
    for (std::size_t i = 0; i < incs.size(); ++i) {
        const ValueCurve* curve = child_curves[i];
        if (curve == nullptr) throw std::invalid_argument("one_step: missing child curve");
        ChildValue c;
        c.prob = incs[i].prob;
        c.delta = incs[i].delta;
        c.value = [curve](double x) { return curve->eval(x); };
        c.kinks = curve->wealth();
        children.push_back(std::move(c));
    }
    return maximize_one_step(wealth, children, cert, tol);
}

CurveBuildResult build_value_curve(const std::vector<double>& grid,
                                   const std::vector<ChildValue>& children,
                                   const NodeCertificate& cert, double tol) {
    if (grid.empty() || grid.front() != 0.0)
        throw std::invalid_argument("build_value_curve: grid must start at 0");
    CurveBuildResult out;
    std::vector<double> values;
    values.reserve(grid.size());
    out.policy.reserve(grid.size());
    const Vec* warm = nullptr;
    for (double x : grid) {
        // the previous maximizer stays feasible as wealth grows and keeps the
        // raw values monotone up to exact ties
        OneStepSolution sol = maximize_one_step(x, children, cert, tol, warm);
        if (!values.empty() && sol.value < values.back()) {
            const double drop = values.back() - sol.value;
            out.worst_drop = std::max(out.worst_drop, drop);
            if (drop > 10.0 * tol)
                throw std::runtime_error(
                    "build_value_curve: value dropped by " + std::to_string(drop) +
                    " at wealth " + std::to_string(x) + "; exceeds the numerical-noise budget");
            if (drop > tol) ++out.repaired;
            sol.value = values.back();
        }
        values.push_back(sol.value);
        out.policy.push_back(sol.position);
        warm = &out.policy.back();
    }
    out.curve = ValueCurve(grid, std::move(values));
    return out;
}

} // namespace ncdp
