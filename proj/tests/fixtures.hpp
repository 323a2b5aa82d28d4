#pragma once

#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ncdp/dp.hpp"
#include "ncdp/oracle.hpp"
#include "ncdp/utility.hpp"

namespace fixtures {

// One-period binomial: root price 1, up to 2 (prob 1/2), down to 1/2.
inline const char* kB1 = R"({
  "assets": 1, "horizon": 1,
  "nodes": [
    {"id": "root", "parent": null, "prob": 1.0, "price": [1.0]},
    {"id": "d", "parent": "root", "prob": 0.5, "price": [0.5]},
    {"id": "u", "parent": "root", "prob": 0.5, "price": [2.0]}
  ]
})";

// The same branching repeated i.i.d. for two periods (prices multiply).
inline const char* kB2 = R"({
  "assets": 1, "horizon": 2,
  "nodes": [
    {"id": "root", "parent": null, "prob": 1.0, "price": [1.0]},
    {"id": "d", "parent": "root", "prob": 0.5, "price": [0.5]},
    {"id": "u", "parent": "root", "prob": 0.5, "price": [2.0]},
    {"id": "dd", "parent": "d", "prob": 0.5, "price": [0.25]},
    {"id": "du", "parent": "d", "prob": 0.5, "price": [1.0]},
    {"id": "ud", "parent": "u", "prob": 0.5, "price": [1.0]},
    {"id": "uu", "parent": "u", "prob": 0.5, "price": [4.0]}
  ]
})";

// Both moves strictly positive: free lunch.
inline const char* kArb = R"({
  "assets": 1, "horizon": 1,
  "nodes": [
    {"id": "root", "parent": null, "prob": 1.0, "price": [1.0]},
    {"id": "a", "parent": "root", "prob": 0.5, "price": [2.0]},
    {"id": "b", "parent": "root", "prob": 0.5, "price": [3.0]}
  ]
})";

// Single child, zero move: the move subspace collapses to {0}.
inline const char* kDeg = R"({
  "assets": 1, "horizon": 1,
  "nodes": [
    {"id": "root", "parent": null, "prob": 1.0, "price": [1.0]},
    {"id": "only", "parent": "root", "prob": 1.0, "price": [1.0]}
  ]
})";

inline ncdp::ScenarioTree b1() { return ncdp::load_tree(kB1); }
inline ncdp::ScenarioTree b2() { return ncdp::load_tree(kB2); }
inline ncdp::ScenarioTree arb() { return ncdp::load_tree(kArb); }
inline ncdp::ScenarioTree deg() { return ncdp::load_tree(kDeg); }

inline ncdp::UtilityModel sqrt_utility() { return ncdp::UtilityModel::power(0.5); }
inline ncdp::GrowthCertificate sqrt_growth() {
    ncdp::GrowthCertificate g;
    g.gamma_bar = 0.5;
    g.x_bar = 1.0;
    g.c = ncdp::NodeScalar(0.0);
    return g;
}

// 0 up to wealth 1.5, linear to 1 at wealth 2, flat after.
inline ncdp::UtilityModel ramp_utility() { return ncdp::UtilityModel::ramp(1.5, 2.0, 1.0); }
inline ncdp::GrowthCertificate ramp_growth() {
    ncdp::GrowthCertificate g;
    g.gamma_bar = 1.0;
    g.x_bar = 2.0;
    g.c = ncdp::NodeScalar(0.0);
    return g;
}

inline ncdp::UtilityModel kf_utility() { return ncdp::UtilityModel::kramkov(); }
inline ncdp::GrowthCertificate kf_growth() {
    ncdp::GrowthCertificate g;
    g.gamma_bar = 1.0;
    g.x_bar = 1.0;
    g.c = ncdp::NodeScalar(0.5);
    return g;
}

// Frozen analytic values.
// One-period binomial with square-root utility from wealth 1: stationarity of
// 0.5 sqrt(1+t) + 0.5 sqrt(1-t/2) gives t = 1, value (3/4) sqrt(2).
inline constexpr double kB1SqrtValue = 1.0606601717798212;
// Two i.i.d. periods compound the same factor twice: (3 sqrt(2)/4)^2 = 9/8.
inline constexpr double kB2SqrtValue = 1.125;
// Ramp utility: only the up branch can reach 2; flat optimum set [1, 2].
inline constexpr double kB1RampValue = 0.5;

// ----- randomized desk-scale instances -----

struct RandomTree {
    ncdp::ScenarioTree tree;
    bool arbitrage = false; // true when one node was built with a free lunch
};

namespace detail {

inline std::vector<double> random_probs(std::mt19937_64& rng, int m) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    std::vector<double> p(m);
    double sum = 0.0;
    for (double& v : p) {
        v = u(rng);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

// Child moves with 0 strictly inside the convex hull (margin kept away from
// the grid tolerances).
inline std::vector<ncdp::Vec> na_moves(std::mt19937_64& rng, int d, int m, bool allow_plane) {
    std::uniform_real_distribution<double> mag(0.2, 1.5);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    const int k =
        allow_plane && std::min(d, m - 1) == 2 && m >= 3 && sym(rng) > 0.0 ? 2 : 1;
    std::vector<ncdp::Vec> z;
    if (k == 1) {
        ncdp::Vec dir = ncdp::Vec::Zero(d);
        if (d == 1) {
            dir(0) = 1.0;
        } else {
            const double a = sym(rng) * 3.14159265358979;
            dir(0) = std::cos(a);
            dir(1) = std::sin(a);
        }
        z.push_back(mag(rng) * dir);
        z.push_back(-mag(rng) * dir);
        if (m == 3) z.push_back(sym(rng) * 0.15 * dir);
        return z;
    }
    // triangle around the origin with bounded angular gaps and a clear inradius
    std::uniform_real_distribution<double> jitter(-0.4, 0.4);
    std::uniform_real_distribution<double> leg(0.5, 1.5);
    for (int attempt = 0; attempt < 200; ++attempt) {
        z.clear();
        for (int i = 0; i < 3; ++i) {
            const double theta = 2.0943951023931953 * i + jitter(rng);
            const double r = leg(rng);
            ncdp::Vec v(2);
            v << r * std::cos(theta), r * std::sin(theta);
            z.push_back(v);
        }
        double inr = 1e9;
        for (int i = 0; i < 3; ++i) {
            const ncdp::Vec& a = z[i];
            const ncdp::Vec& b = z[(i + 1) % 3];
            const double cross = a(0) * b(1) - a(1) * b(0);
            inr = std::min(inr, std::abs(cross) / (a - b).norm());
        }
        if (inr > 0.2) return z;
    }
    throw std::runtime_error("fixtures: failed to draw a triangle around the origin");
}

// Every move gains along a common direction: a one-step free lunch with a
// margin wide enough for coarse direction grids.
inline std::vector<ncdp::Vec> arb_moves(std::mt19937_64& rng, int d, int m) {
    std::uniform_real_distribution<double> gain(0.3, 1.5);
    std::uniform_real_distribution<double> side(-0.5, 0.5);
    ncdp::Vec u = ncdp::Vec::Zero(d);
    if (d == 1) {
        u(0) = side(rng) > 0.0 ? 1.0 : -1.0;
    } else {
        const double a = side(rng) * 6.283185307179586;
        u(0) = std::cos(a);
        u(1) = std::sin(a);
    }
    std::vector<ncdp::Vec> z;
    for (int i = 0; i < m; ++i) {
        ncdp::Vec v = gain(rng) * u;
        if (d == 2) {
            ncdp::Vec perp(2);
            perp << -u(1), u(0);
            v += side(rng) * perp;
        }
        z.push_back(v);
    }
    return z;
}

} // namespace detail

/// Small random market: horizon <= 2, d <= 2, two or three children per
/// node. When with_arbitrage, exactly one internal node gets free-lunch
/// moves.
inline RandomTree random_tree(std::uint64_t seed, bool with_arbitrage = false) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    const int T = 1 + coin(rng);
    const int d = 1 + coin(rng);

    std::ostringstream nodes;
    nodes << std::setprecision(17); // probabilities must round-trip exactly
    nodes << R"({"id": "n", "parent": null, "prob": 1.0, "price": [5.0)";
    if (d == 2) nodes << ", 5.0";
    nodes << "]}";

    struct Open {
        std::string id;
        ncdp::Vec price;
    };
    std::vector<Open> frontier;
    {
        ncdp::Vec p0 = ncdp::Vec::Constant(d, 5.0);
        frontier.push_back({"n", p0});
    }
    // every realization has at least this many internal nodes
    const int internal_min = T == 1 ? 1 : 3;
    std::uniform_int_distribution<int> pick_bad(0, internal_min - 1);
    const int bad_node = with_arbitrage ? pick_bad(rng) : -1;

    int visited = 0;
    for (int t = 1; t <= T; ++t) {
        std::vector<Open> next;
        for (const Open& parent : frontier) {
            const int m = 2 + coin(rng);
            const bool bad = visited == bad_node;
            ++visited;
            // planar move sets stay on one-period trees: the comparison
            // oracle's product grid loses too much resolution when planar
            // positions compound over two periods
            const auto moves =
                bad ? detail::arb_moves(rng, d, m) : detail::na_moves(rng, d, m, T == 1);
            const auto probs = detail::random_probs(rng, static_cast<int>(moves.size()));
            for (std::size_t i = 0; i < moves.size(); ++i) {
                Open child{parent.id + "." + std::to_string(i), parent.price + moves[i]};
                nodes << ",\n{\"id\": \"" << child.id << "\", \"parent\": \"" << parent.id
                      << "\", \"prob\": " << probs[i] << ", \"price\": [" << child.price(0);
                if (d == 2) nodes << ", " << child.price(1);
                nodes << "]}";
                next.push_back(std::move(child));
            }
        }
        frontier = std::move(next);
    }

    std::ostringstream doc;
    doc << R"({"assets": )" << d << R"(, "horizon": )" << T << R"(, "nodes": [)" << nodes.str()
        << "]}";
    return RandomTree{ncdp::load_tree(doc.str()), with_arbitrage};
}

/// Increasing piecewise-linear utility with its analytically valid growth
/// certificate: with the steepest slope S placed on the unbounded tail,
/// u(lambda x) <= u(x) + S (lambda - 1) x <= lambda u(x) + lambda c
/// for c = max_{x >= 1} (S x - u(x))^+, attained at the last knot.
struct RandomUtility {
    ncdp::UtilityModel model = ncdp::UtilityModel::power(1.0);
    ncdp::GrowthCertificate growth;
};

inline RandomUtility random_pw_utility(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> knot1(0.3, 2.0);
    std::uniform_real_distribution<double> span(0.5, 3.0);
    std::uniform_real_distribution<double> slope(0.1, 3.0);
    std::uniform_real_distribution<double> level(0.0, 0.5);

    const double k1 = knot1(rng);
    const double k2 = k1 + span(rng);
    double s1 = slope(rng), s2 = slope(rng), s3 = slope(rng);
    // steepest slope on the tail keeps the certificate analytic
    if (s1 > s3) std::swap(s1, s3);
    if (s2 > s3) std::swap(s2, s3);
    const double u0 = level(rng);

    ncdp::PiecewisePolynomial pw;
    pw.knots = {0.0, k1, k2};
    const double v1 = u0 + s1 * k1;
    const double v2 = v1 + s2 * (k2 - k1);
    pw.coeffs = {{u0, s1}, {v1, s2}, {v2, s3}};

    RandomUtility out;
    out.model = ncdp::UtilityModel::piecewise_polynomial(pw);
    out.growth.gamma_bar = 1.0;
    out.growth.x_bar = 1.0;
    const double m = std::max(k2, 1.0);
    out.growth.c = ncdp::NodeScalar(std::max(0.0, s3 * m - out.model.eval(m)));
    return out;
}

} // namespace fixtures

namespace fixtures {

/// Three i.i.d. binomial periods (prices multiply); 15 nodes.
inline ncdp::ScenarioTree b3() {
    std::ostringstream doc;
    doc << std::setprecision(17);
    doc << R"({"assets": 1, "horizon": 3, "nodes": [)";
    doc << R"({"id": "r", "parent": null, "prob": 1.0, "price": [1.0]})";
    std::vector<std::pair<std::string, double>> frontier{{"r", 1.0}};
    for (int t = 1; t <= 3; ++t) {
        std::vector<std::pair<std::string, double>> next;
        for (const auto& [id, price] : frontier) {
            next.emplace_back(id + "u", price * 2.0);
            next.emplace_back(id + "d", price * 0.5);
        }
        for (const auto& [id, price] : next) {
            doc << ",\n{\"id\": \"" << id << "\", \"parent\": \"" << id.substr(0, id.size() - 1)
                << "\", \"prob\": 0.5, \"price\": [" << price << "]}";
        }
        frontier = std::move(next);
    }
    doc << "]}";
    return ncdp::load_tree(doc.str());
}

} // namespace fixtures
