#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Dense>

#include "spotid/errors.hpp"
#include "spotid/registration.hpp"
#include "oracles.hpp"

using namespace spotid;
using namespace spotid::registration;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SpotCloud transformed(const SpotCloud& c, double angle, const Point& t, double scale = 1.0) {
    const Eigen::Matrix2d r = Eigen::Rotation2D<double>(angle).toRotationMatrix();
    SpotCloud out;
    for (const auto& p : c.points) out.points.push_back(scale * (r * p) + t);
    return out;
}

}  // namespace

TEST_CASE("nearest correspondences") {
    std::mt19937_64 rng(1);
    const auto c = testing::random_cloud(25, 100, rng);
    for (const auto& k : nearest_correspondences(c, c)) {
        CHECK(k.source_index == k.target_index);
        CHECK(k.distance == 0.0);
    }

    SpotCloud s{{Point(0, 0)}}, t{{Point(1, 0), Point(3, 0)}};
    const auto one = nearest_correspondences(s, t);
    REQUIRE(one.size() == 1);
    CHECK(one[0].target_index == 0);
    CHECK(one[0].distance == doctest::Approx(1.0));

    for (int k = 0; k < 10; ++k) {
        const auto a = testing::random_cloud(50, 100, rng);
        const auto b = testing::random_cloud(50, 100, rng);
        const auto got = nearest_correspondences(a, b);
        for (std::size_t i = 0; i < a.size(); ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < b.size(); ++j)
                if ((a[i] - b[j]).norm() < (a[i] - b[best]).norm()) best = j;
            CHECK(got[i].source_index == i);
            CHECK(got[i].target_index == best);
            CHECK(got[i].distance == doctest::Approx((a[i] - b[best]).norm()).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(nearest_correspondences(SpotCloud{}, t), InvalidInput);
}

TEST_CASE("rigid estimation") {
    std::mt19937_64 rng(2);
    const auto c = testing::random_cloud(20, 100, rng);

    auto r = estimate_rigid(c.points, c.points);
    CHECK((r.rotation - Eigen::Matrix2d::Identity()).norm() < 1e-9);
    CHECK(r.translation.norm() < 1e-9);

    r = estimate_rigid(c.points, transformed(c, 0, Point(3, 4)).points);
    CHECK((r.rotation - Eigen::Matrix2d::Identity()).norm() < 1e-9);
    CHECK((r.translation - Point(3, 4)).norm() < 1e-9);

    const auto moved = transformed(c, 37 * kDeg, Point(-2, 5));
    r = estimate_rigid(c.points, moved.points);
    CHECK(r.angle() == doctest::Approx(37 * kDeg).epsilon(1e-6));
    CHECK((r.translation - Point(-2, 5)).norm() < 1e-6);
    double residual = 0;
    for (std::size_t i = 0; i < c.size(); ++i) residual += (r.apply(c[i]) - moved[i]).squaredNorm();
    CHECK(residual < 1e-6);
    CHECK(r.rotation.determinant() == doctest::Approx(1.0));

    // A mirrored target still yields a proper rotation.
    SpotCloud mirrored;
    for (const auto& p : c.points) mirrored.points.emplace_back(-p.x(), p.y());
    CHECK(estimate_rigid(c.points, mirrored.points).rotation.determinant() == doctest::Approx(1.0));

    CHECK_THROWS_AS(estimate_rigid({Point(1, 1)}, {Point(2, 2)}), DegenerateGeometry);
    CHECK_THROWS_AS(estimate_rigid({Point(1, 1), Point(1, 1)}, {Point(0, 0), Point(2, 2)}), DegenerateGeometry);
}

TEST_CASE("icp") {
    std::mt19937_64 rng(3);
    SUBCASE("identical clouds converge at once") {
        const auto c = testing::random_cloud(30, 100, rng);
        const auto r = icp(c, c);
        CHECK(r.objective == 0.0);
        CHECK(r.converged);
        CHECK(r.iterations == 1);
    }
    SUBCASE("small rigid motions are recovered exactly") {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int k = 0; k < 30; ++k) {
            const auto c = testing::random_cloud(20 + k * 3, 100, rng);
            const auto target = transformed(c, 8 * kDeg * u(rng), Point(4 * u(rng), 4 * u(rng)));
            const auto r = icp(c, target);
            CHECK(r.objective < 1e-9);
        }
    }
    SUBCASE("objective never increases") {
        for (int k = 0; k < 20; ++k) {
            const auto a = testing::random_cloud(40, 100, rng);
            const auto b = testing::random_cloud(35, 100, rng);
            const auto r = icp(a, b);
            for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
                CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
            CHECK(r.objective == r.objective_trace.back());
            CHECK(r.iterations <= IcpOptions{}.max_iterations);
        }
    }
    SUBCASE("outliers in the source") {
        const auto target = testing::random_cloud(40, 100, rng);
        auto source = transformed(target, 5 * kDeg, Point(2, -1));
        for (int i = 0; i < 4; ++i) source.points.push_back(testing::random_cloud(1, 300, rng)[0]);
        const auto r = icp(source, target);
        CHECK(std::isfinite(r.objective));
        REQUIRE(r.correspondences.size() == source.size());
        for (const auto& k : r.correspondences) CHECK(k.target_index < target.size());
    }
    SUBCASE("too few points") {
        const SpotCloud one{{Point(0, 0)}};
        CHECK_THROWS_AS(icp(one, testing::random_cloud(5, 10, rng)), InvalidInput);
    }
}

TEST_CASE("one-to-one assignment") {
    std::mt19937_64 rng(4);
    const auto c = testing::random_cloud(15, 100, rng);
    const auto same = one_to_one_assign(c, c);
    REQUIRE(same.size() == c.size());
    for (const auto& a : same) CHECK(a.source_index == a.target_index);

    const SpotCloud s{{Point(0, 0), Point(10, 0)}}, t{{Point(0.1, 0), Point(9.8, 0)}};
    CHECK(one_to_one_assign(s, t) == std::vector<Assignment>{{0, 0}, {1, 1}});

    const auto base = testing::random_cloud(30, 100, rng);
    std::vector<std::size_t> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SpotCloud shuffled;
    for (auto i : perm) shuffled.points.push_back(base[i]);
    for (const auto& a : one_to_one_assign(shuffled, base)) CHECK(perm[a.source_index] == a.target_index);

    // Unequal sizes: min(n, m) pairs, no index repeated.
    const auto big = testing::random_cloud(25, 100, rng), small = testing::random_cloud(18, 100, rng);
    const auto pairs = one_to_one_assign(big, small);
    CHECK(pairs.size() == 18);
    std::set<std::size_t> src, dst;
    for (const auto& a : pairs) src.insert(a.source_index), dst.insert(a.target_index);
    CHECK(src.size() == 18);
    CHECK(dst.size() == 18);
}

TEST_CASE("procrustes") {
    std::mt19937_64 rng(5);
    const auto x = testing::random_cloud(12, 50, rng);
    CHECK(procrustes(x.points, x.points).dissimilarity < 1e-12);

    const auto y = transformed(x, 61 * kDeg, Point(5, -2), 3.7);
    const auto r = procrustes(y.points, x.points);
    CHECK(r.dissimilarity < 1e-9);
    CHECK(r.scale == doctest::Approx(3.7));
    CHECK(std::atan2(r.rotation(1, 0), r.rotation(0, 0)) == doctest::Approx(61 * kDeg));

    const std::vector<Point> square = {Point(0, 0), Point(1, 0), Point(1, 1), Point(0, 1)};
    std::vector<Point> bent = square;
    bent[2] += Point(0.1, 0.1);
    CHECK(procrustes(square, bent).dissimilarity == doctest::Approx(oracle::procrustes(square, bent)).epsilon(1e-6));

    std::normal_distribution<double> n(0.0, 4.0);
    for (int k = 0; k < 10; ++k) {
        const auto a = testing::random_cloud(8 + k, 60, rng);
        auto b = transformed(a, (k * 37 % 360) * kDeg, Point(n(rng), n(rng)), 0.5 + 0.15 * k);
        for (auto& p : b.points) p += Point(n(rng), n(rng));
        const double d = procrustes(a.points, b.points).dissimilarity;
        CHECK(d == doctest::Approx(oracle::procrustes(a.points, b.points)).epsilon(1e-6));
        CHECK((d >= 0.0 && d <= 1.0));
    }

    // A reflection is not a similarity.
    std::vector<Point> mirrored;
    for (const auto& p : x.points) mirrored.emplace_back(-p.x(), p.y());
    CHECK(procrustes(x.points, mirrored).dissimilarity > 1e-3);

    CHECK_THROWS_AS(procrustes(x.points, std::vector<Point>(x.points.begin(), x.points.end() - 1)), InvalidInput);
    CHECK_THROWS_AS(procrustes({Point(1, 1)}, {Point(1, 1)}), InvalidInput);
    CHECK_THROWS_AS(procrustes({Point(1, 1), Point(1, 1)}, {Point(0, 0), Point(1, 0)}), InvalidInput);
}

TEST_CASE("cloud CSV round trip") {
    std::mt19937_64 rng(6);
    const auto c = testing::random_cloud(17, 100, rng);
    const auto text = cloud_to_csv(c);
    CHECK(text.rfind("x,y\n", 0) == 0);
    CHECK(cloud_from_csv(text) == c);
    CHECK(cloud_from_csv("x,y\n") == SpotCloud{});
    CHECK_THROWS_AS(cloud_from_csv("x,y\n1,abc\n"), InvalidInput);
}
