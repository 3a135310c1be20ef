#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "koop/datagen.hpp"
#include "koop/dictionary.hpp"

using namespace koop;

namespace {

/// Brute-force monomial enumeration used as an independent oracle for the
/// polynomial lift: every (a, b, c) with 1 <= a+b+c <= m evaluated and
/// collected as a multiset of values.
std::multiset<double> enumerate_monomials(const Eigen::Vector3d& x, int m) {
    std::multiset<double> values;
    for (int a = 0; a <= m; ++a) {
        for (int b = 0; b + a <= m; ++b) {
            for (int c = 0; c + a + b <= m; ++c) {
                if (a + b + c == 0) continue;
                values.insert(std::pow(x[0], a) * std::pow(x[1], b) * std::pow(x[2], c));
            }
        }
    }
    return values;
}

SnapshotDataset tiny_surrogate_dataset(int duration, std::uint64_t seed) {
    const PlantParams p;
    ExcitationSpec spec;
    spec.duration_s = duration;
    spec.rng_seed = seed;
    std::vector<Trajectory> trajs;
    trajs.push_back(simulate_trajectory({420.0, 1250.0, 24.0}, generate_excitation(spec), p));
    return assemble_snapshots(trajs);
}

}  // namespace

TEST_SUITE("dictionary") {

TEST_CASE("polynomial dimension recursion") {
    CHECK(polynomial_dim(0) == 0);
    CHECK(polynomial_dim(1) == 3);
    CHECK(polynomial_dim(2) == 9);
    CHECK(polynomial_dim(3) == 19);
    CHECK(polynomial_dim(4) == 34);
    CHECK(polynomial_dim(5) == 55);
    CHECK(polynomial_dim(6) == 83);
    CHECK(polynomial_dim(7) == 119);
    // the recursion itself: N(m) = N(m-1) + (m+1)(m+2)/2
    for (int m = 1; m <= 9; ++m) {
        CHECK(polynomial_dim(m) == polynomial_dim(m - 1) + (m + 1) * (m + 2) / 2);
    }
}

TEST_CASE("polynomial lift length matches the declared dimension") {
    const Eigen::Vector3d x(1.3, -0.4, 2.1);
    for (int m = 1; m <= 7; ++m) {
        CHECK(lift_polynomial(x, m).size() == polynomial_dim(m));
    }
}

TEST_CASE("polynomial lift at 0 and 1") {
    CHECK(lift_polynomial(Eigen::Vector3d::Zero(), 3).isZero(0.0));
    const Eigen::VectorXd ones = lift_polynomial(Eigen::Vector3d::Ones(), 4);
    CHECK(ones.size() == 34);
    CHECK((ones.array() == 1.0).all());
}

TEST_CASE("polynomial lift of (2,0,1) at degree 2 in the fixed order") {
    const Eigen::VectorXd z = lift_polynomial(Eigen::Vector3d(2.0, 0.0, 1.0), 2);
    const std::vector<double> expected = {2, 0, 1, 4, 0, 2, 0, 0, 1};
    REQUIRE(z.size() == 9);
    for (int i = 0; i < 9; ++i) CHECK(z[i] == expected[i]);
}

TEST_CASE("polynomial values agree with a brute-force enumeration oracle") {
    const Eigen::Vector3d x(0.7, -1.2, 0.3);
    for (int m = 1; m <= 5; ++m) {
        const Eigen::VectorXd z = lift_polynomial(x, m);
        std::multiset<double> got(z.data(), z.data() + z.size());
        auto expected = enumerate_monomials(x, m);
        REQUIRE(got.size() == expected.size());
        auto it_got = got.begin();
        auto it_exp = expected.begin();
        for (; it_got != got.end(); ++it_got, ++it_exp) {
            CHECK(*it_got == doctest::Approx(*it_exp).epsilon(1e-13));
        }
    }
}

TEST_CASE("state pass-through holds for the polynomial dictionary") {
    const PolynomialDictionary dict(5);
    const Eigen::Vector3d x(431.5, 1287.0, 23.7);
    const Eigen::VectorXd z = dict.lift(x);
    CHECK(z[0] == x[0]);
    CHECK(z[1] == x[1]);
    CHECK(z[2] == x[2]);
}

// --- kernels ---------------------------------------------------------------

TEST_CASE("kernel values at characteristic radii") {
    const Eigen::Vector3d c(0.0, 0.0, 0.0);
    auto at_r = [&](double r) { return Eigen::Vector3d(r, 0.0, 0.0); };

    CHECK(rbf_eval(RbfKind::kThinPlateSpline, at_r(0.0), c, 1.0) == 0.0);
    CHECK(rbf_eval(RbfKind::kThinPlateSpline, at_r(1.0), c, 1.0) == 0.0);
    const double e = std::exp(1.0);
    CHECK(rbf_eval(RbfKind::kThinPlateSpline, at_r(e), c, 1.0) ==
          doctest::Approx(e * e).epsilon(1e-14));
    CHECK(rbf_eval(RbfKind::kGaussian, at_r(0.0), c, 1.3) == 1.0);
    CHECK(rbf_eval(RbfKind::kInverseQuadratic, at_r(0.0), c, 1.3) == 1.0);
    // spot values
    CHECK(rbf_eval(RbfKind::kGaussian, at_r(2.0), c, 0.5) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(rbf_eval(RbfKind::kInverseQuadratic, at_r(2.0), c, 0.5) ==
          doctest::Approx(0.5).epsilon(1e-14));
}

// --- k-means ---------------------------------------------------------------

TEST_CASE("k = 1 returns the centroid") {
    RngStream rng(11);
    Eigen::MatrixXd pts(3, 50);
    for (int j = 0; j < 50; ++j) {
        for (int i = 0; i < 3; ++i) pts(i, j) = rng.normal();
    }
    const Eigen::MatrixXd centers = kmeans(pts, 1, 99);
    CHECK((centers.col(0) - pts.rowwise().mean()).norm() < 1e-12);
}

TEST_CASE("k = M distinct points returns the points") {
    Eigen::MatrixXd pts(3, 5);
    pts << 0, 1, 2, 3, 4,
           0, 1, 2, 3, 4,
           0, 1, 2, 3, 4;
    const Eigen::MatrixXd centers = kmeans(pts, 5, 3);
    // every point must be recovered as a center (order free)
    for (int j = 0; j < 5; ++j) {
        double best = 1e18;
        for (int c = 0; c < 5; ++c) best = std::min(best, (centers.col(c) - pts.col(j)).norm());
        CHECK(best < 1e-12);
    }
}

TEST_CASE("three well-separated blobs are recovered") {
    RngStream rng(2718);
    const double radius = 0.5;
    Eigen::Matrix3d means;
    means.col(0) = Eigen::Vector3d(0, 0, 0);
    means.col(1) = Eigen::Vector3d(10, 0, 0);  // gap 10x blob radius
    means.col(2) = Eigen::Vector3d(0, 12, 5);
    Eigen::MatrixXd pts(3, 300);
    Eigen::Matrix3d sample_mean = Eigen::Matrix3d::Zero();
    for (int j = 0; j < 300; ++j) {
        const int blob = j % 3;
        for (int i = 0; i < 3; ++i) pts(i, j) = means(i, blob) + radius * rng.normal();
        sample_mean.col(blob) += pts.col(j) / 100.0;
    }
    const Eigen::MatrixXd centers = kmeans(pts, 3, 5);
    for (int blob = 0; blob < 3; ++blob) {
        double best = 1e18;
        for (int c = 0; c < 3; ++c) {
            best = std::min(best, (centers.col(c) - sample_mean.col(blob)).norm());
        }
        CHECK(best < 0.1);
    }
}

TEST_CASE("kmeans objective is non-increasing across Lloyd iterations") {
    RngStream rng(31);
    Eigen::MatrixXd pts(3, 200);
    for (int j = 0; j < 200; ++j) {
        for (int i = 0; i < 3; ++i) pts(i, j) = rng.uniform(-3.0, 3.0);
    }
    // run kmeans with increasing iteration caps; the objective of the result
    // must never rise as more iterations are allowed
    double prev = std::numeric_limits<double>::infinity();
    for (int iters = 1; iters <= 12; ++iters) {
        const Eigen::MatrixXd centers = kmeans(pts, 8, 77, iters, 0.0);
        const double obj = kmeans_objective(pts, centers);
        CHECK(obj <= prev + 1e-9);
        prev = obj;
    }
}

TEST_CASE("kmeans is deterministic for a fixed seed and rejects k > M") {
    RngStream rng(13);
    Eigen::MatrixXd pts(3, 40);
    for (int j = 0; j < 40; ++j) {
        for (int i = 0; i < 3; ++i) pts(i, j) = rng.normal();
    }
    CHECK(kmeans(pts, 6, 123) == kmeans(pts, 6, 123));
    CHECK_THROWS_AS(kmeans(pts, 41, 1), ConfigError);
}

// --- RBF dictionary ----------------------------------------------------------

TEST_CASE("N = 4 has a single center at the normalized-state centroid") {
    const SnapshotDataset ds = tiny_surrogate_dataset(120, 6);
    const auto dict = build_rbf_dictionary(ds, 4, RbfKind::kGaussian, 1.0, 5);
    REQUIRE(dict->centers().cols() == 1);
    // the normalized training states have zero mean, so the centroid is ~0
    CHECK(dict->centers().col(0).norm() < 1e-10);
}

TEST_CASE("N = 35 thin plate dictionary lifts to length 35 with exact pass-through") {
    const SnapshotDataset ds = tiny_surrogate_dataset(400, 9);
    const auto dict = build_rbf_dictionary(ds, 35, RbfKind::kThinPlateSpline, 1.0, 5);
    const Eigen::Vector3d x(433.0, 1301.0, 22.4);
    const Eigen::VectorXd z = dict->lift(x);
    REQUIRE(z.size() == 35);
    CHECK(z[0] == x[0]);
    CHECK(z[1] == x[1]);
    CHECK(z[2] == x[2]);
    CHECK(z.allFinite());
}

TEST_CASE("same seed gives identical centers") {
    const SnapshotDataset ds = tiny_surrogate_dataset(200, 10);
    const auto a = build_rbf_dictionary(ds, 12, RbfKind::kGaussian, 1.0, 42);
    const auto b = build_rbf_dictionary(ds, 12, RbfKind::kGaussian, 1.0, 42);
    CHECK(a->centers() == b->centers());
}

TEST_CASE("dimension and data guards") {
    const SnapshotDataset ds = tiny_surrogate_dataset(30, 11);
    CHECK_THROWS_AS(build_rbf_dictionary(ds, 3, RbfKind::kGaussian, 1.0, 1), ConfigError);
    CHECK_THROWS_AS(build_rbf_dictionary(ds, 40, RbfKind::kGaussian, 1.0, 1), ConfigError);
}

TEST_CASE("batch lift equals per-column lift exactly") {
    const SnapshotDataset ds = tiny_surrogate_dataset(150, 12);
    const auto dict = build_rbf_dictionary(ds, 10, RbfKind::kInverseQuadratic, 0.7, 3);
    const Eigen::MatrixXd z = dict->lift_batch(ds.X);
    for (Eigen::Index j = 0; j < ds.X.cols(); j += 17) {
        CHECK(z.col(j) == dict->lift(ds.X.col(j)));
    }
}

}  // TEST_SUITE
