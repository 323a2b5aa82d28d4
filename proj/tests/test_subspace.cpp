#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "ncdp/subspace.hpp"

using namespace ncdp;

namespace {

Vec v1(double a) {
    Vec v(1);
    v << a;
    return v;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

} // namespace

TEST_CASE("hull of the binomial moves is the full line") {
    const AffineHull hull = support_hull_basis({v1(1.0), v1(-0.5)});
    CHECK(hull.basis.dim() == 1);
    CHECK(hull.basis.vectors(0, 0) == doctest::Approx(1.0));
    CHECK(hull.is_linear);
}

TEST_CASE("hull of a single zero move is the origin") {
    const AffineHull hull = support_hull_basis({v1(0.0)});
    CHECK(hull.basis.dim() == 0);
    CHECK(hull.is_linear);
}

TEST_CASE("hull of a single nonzero move is a displaced point") {
    const AffineHull hull = support_hull_basis({v1(0.7)});
    CHECK(hull.basis.dim() == 0);
    CHECK_FALSE(hull.is_linear);
}

TEST_CASE("diagonal pair spans the diagonal through the origin") {
    const AffineHull hull = support_hull_basis({v2(1.0, 1.0), v2(-1.0, -1.0)});
    REQUIRE(hull.basis.dim() == 1);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(hull.basis.vectors(0, 0) == doctest::Approx(s));
    CHECK(hull.basis.vectors(1, 0) == doctest::Approx(s));
    CHECK(hull.is_linear);
}

TEST_CASE("offset line misses the origin") {
    const AffineHull hull = support_hull_basis({v2(1.0, 1.0), v2(2.0, 1.0)});
    CHECK(hull.basis.dim() == 1);
    CHECK_FALSE(hull.is_linear);
}

TEST_CASE("projection examples") {
    const SubspaceBasis full = support_hull_basis({v1(1.0), v1(-0.5)}).basis;
    CHECK(project(v1(3.0), full)(0) == doctest::Approx(3.0));

    const SubspaceBasis trivial = support_hull_basis({v1(0.0)}).basis;
    CHECK(project(v1(5.0), trivial)(0) == doctest::Approx(0.0));

    const SubspaceBasis diag = support_hull_basis({v2(1.0, 1.0), v2(-1.0, -1.0)}).basis;
    const Vec p = project(v2(2.0, 0.0), diag);
    CHECK(p(0) == doctest::Approx(1.0));
    CHECK(p(1) == doctest::Approx(1.0));
}

TEST_CASE("hull is invariant under permutation and duplicates") {
    const AffineHull a = support_hull_basis({v2(1.0, 0.2), v2(-0.5, -0.1), v2(0.25, 0.05)});
    const AffineHull b = support_hull_basis(
        {v2(0.25, 0.05), v2(1.0, 0.2), v2(-0.5, -0.1), v2(1.0, 0.2), v2(-0.5, -0.1)});
    CHECK(a.basis.dim() == b.basis.dim());
    CHECK(a.is_linear == b.is_linear);
    REQUIRE(a.basis.dim() == 1);
    CHECK((a.basis.vectors - b.basis.vectors).norm() < 1e-12);
}

TEST_CASE("projection is idempotent and norm-nonincreasing") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int round = 0; round < 200; ++round) {
        std::vector<Vec> pts;
        const int m = 2 + static_cast<int>(rng() % 3);
        for (int i = 0; i < m; ++i) pts.push_back(v2(gauss(rng), gauss(rng)));
        const SubspaceBasis basis = support_hull_basis(pts).basis;
        const Vec x = v2(gauss(rng), gauss(rng));
        const Vec px = project(x, basis);
        CHECK((project(px, basis) - px).norm() < 1e-10);
        CHECK(px.norm() <= x.norm() + 1e-12);
    }
}

TEST_CASE("projection onto the move subspace leaves child payoffs unchanged") {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::uint64_t seed : {11, 12, 13}) {
        const ScenarioTree tree = fixtures::random_tree(seed).tree;
        for (int node : tree.internal_nodes()) {
            const auto incs = tree.increments(node);
            const SubspaceBasis basis = support_hull_basis(incs).basis;
            for (int round = 0; round < 1000; ++round) {
                Vec xi(tree.asset_count());
                for (int j = 0; j < xi.size(); ++j) xi(j) = gauss(rng);
                const Vec pxi = project(xi, basis);
                for (const Increment& inc : incs)
                    CHECK(std::abs(pxi.dot(inc.delta) - xi.dot(inc.delta)) < 1e-10);
            }
        }
    }
}

TEST_CASE("bases are orthonormal") {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int round = 0; round < 100; ++round) {
        std::vector<Vec> pts;
        const int m = 2 + static_cast<int>(rng() % 4);
        const int d = 2 + static_cast<int>(rng() % 3);
        for (int i = 0; i < m; ++i) {
            Vec p(d);
            for (int j = 0; j < d; ++j) p(j) = gauss(rng);
            pts.push_back(p);
        }
        const SubspaceBasis basis = support_hull_basis(pts).basis;
        const Eigen::MatrixXd gram =
            basis.vectors.transpose() * basis.vectors -
            Eigen::MatrixXd::Identity(basis.dim(), basis.dim());
        CHECK(gram.cwiseAbs().maxCoeff() < 1e-10);
    }
}
