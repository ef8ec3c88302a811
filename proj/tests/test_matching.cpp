#include <doctest.h>

#include <cmath>
#include <numbers>

#include "spotid/errors.hpp"
#include "spotid/gallery.hpp"
#include "spotid/matching.hpp"
#include "spotid/synthetic.hpp"
#include "support.hpp"

using namespace spotid;
using namespace spotid::matching;
using gallery::make_record;
using registration::Point;

namespace {

BinaryMask spots_mask(const SpotCloud& centres, int w = 200, int h = 200) {
    return synthetic::rasterize_spots(centres, 3.0, w, h);
}

SpotCloud moved(const SpotCloud& c, double deg, Eigen::Vector2d t, double scale = 1.0,
                Eigen::Vector2d about = {100, 100}) {
    const double a = deg * std::numbers::pi / 180.0;
    const Eigen::Matrix2d r{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
    SpotCloud out;
    for (const auto& p : c.points) out.points.push_back(scale * (r * (p - about)) + about + t);
    return out;
}

Gallery small_gallery(int individuals, std::uint64_t seed) {
    Gallery g;
    for (int i = 0; i < individuals; ++i) {
        const auto layout = synthetic::poisson_disc_layout(18, 200, 200, 14, 30, seed + i);
        g.records.push_back(make_record("I" + std::to_string(i), "s1", spots_mask(layout)));
    }
    return g;
}

}  // namespace

TEST_CASE("centroid extraction") {
    CHECK(extract_centroids(BinaryMask(10, 10)).empty());

    BinaryMask sq(12, 8);
    testing::fill_rect(sq, 5, 2, 8, 5);
    const auto one = extract_centroids(sq);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == Point(6, 3));

    std::mt19937_64 rng(1);
    for (int k = 0; k < 20; ++k) {
        const auto m = testing::random_mask(24, 24, 0.15, rng);
        const auto [ids, n] = testing::oracle_regions(m);
        std::vector<Point> sum(static_cast<std::size_t>(n), Point::Zero());
        std::vector<int> count(static_cast<std::size_t>(n), 0);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                const int id = ids[static_cast<std::size_t>(y * 24 + x)];
                if (id < 0) continue;
                sum[id] += Point(x, y);
                ++count[id];
            }
        // The oracle numbers regions by first raster appearance too.
        const auto got = extract_centroids(m);
        REQUIRE(got.size() == static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) CHECK((got[i] - sum[i] / count[i]).norm() < 1e-12);
    }

    BinaryMask seven(60, 20);
    for (int i = 0; i < 7; ++i) testing::fill_rect(seven, 2 + 8 * i, 4 + i, 5 + 8 * i, 8 + i);
    CHECK(extract_centroids(seven).size() == 7);
}

TEST_CASE("mask normalization") {
    std::mt19937_64 rng(2);
    const auto m = testing::random_mask(30, 20, 0.3, rng);
    CHECK(normalize_mask(m, 30, 20) == m);
    CHECK(normalize_mask(normalize_mask(m, 45, 33), 45, 33) == normalize_mask(m, 45, 33));
    CHECK_THROWS_AS(normalize_mask(m, 0, 10), InvalidParameter);

    BinaryMask dot(4, 4);
    dot.set(1, 2);
    const auto up = normalize_mask(dot, 8, 8);
    CHECK(up.count() == 4);
    CHECK((up.test(2, 4) && up.test(3, 5)));

    const auto layout = synthetic::poisson_disc_layout(12, 400, 400, 40, 30, 4);
    const auto big = synthetic::rasterize_spots(layout, 6, 400, 400);
    CHECK(extract_centroids(normalize_mask(big, 200, 200)).size() == 12);
}

TEST_CASE("icp matching") {
    const auto g = small_gallery(6, 10);
    const auto& rec = g.records[2];
    CHECK(match_icp(rec.mask, rec).dissimilarity < 1e-9);

    const auto layout = extract_centroids(rec.mask);
    const auto query = spots_mask(moved(layout, 6, {3, -2}));
    const auto self = match_icp(query, rec).dissimilarity;
    CHECK(self < 0.5);
    for (const auto& other : g.records)
        if (other.individual_id != rec.individual_id) CHECK(self < match_icp(query, other).dissimilarity);

    CHECK_THROWS_AS(match_icp(BinaryMask(200, 200), rec), UnmatchableRecord);

    // Raw objective grows with the spot count; the default divides by it.
    MatchOptions raw;
    raw.icp_mean_residual = false;
    const auto n = static_cast<double>(extract_centroids(query).size());
    CHECK(match_icp(query, rec, raw).dissimilarity == doctest::Approx(self * n));
}

TEST_CASE("icp + procrustes matching") {
    const auto g = small_gallery(8, 20);
    const auto& rec = g.records[5];
    CHECK(match_icp_procrustes(rec.mask, rec).dissimilarity < 1e-9);

    const auto layout = extract_centroids(rec.mask);
    const auto query = spots_mask(moved(layout, 4, {2, 2}, 1.06));
    const auto self = match_icp_procrustes(query, rec).dissimilarity;
    CHECK(self < 0.05);
    const auto ranked = identify(query, g, Method::IcpProcrustes);
    CHECK(ranked.scores.front().key() == rec.key());

    // 25 query spots against an 18-spot record: 18 pairs.
    auto extra = layout;
    for (const auto& p : synthetic::poisson_disc_layout(7, 200, 200, 10, 5, 99).points) extra.points.push_back(p);
    const auto detail = match(spots_mask(extra), rec, Method::IcpProcrustes);
    CHECK(detail.pairs == 18);
    CHECK((detail.score.dissimilarity >= 0.0 && detail.score.dissimilarity <= 1.0));
}

TEST_CASE("identify") {
    const auto g = small_gallery(10, 30);
    SUBCASE("single-record gallery") {
        Gallery one;
        one.records.push_back(g.records[0]);
        const auto r = identify(g.records[0].mask, one, Method::Icp);
        REQUIRE(r.scores.size() == 1);
        CHECK(r.scores[0].dissimilarity < 1e-9);
    }
    SUBCASE("both methods rank well-formed and differ") {
        const auto q = spots_mask(moved(extract_centroids(g.records[3].mask), 5, {1, 1}));
        const auto a = identify(q, g, Method::Icp);
        const auto b = identify(q, g, Method::IcpProcrustes);
        REQUIRE(a.scores.size() == g.size());
        REQUIRE(b.scores.size() == g.size());
        for (std::size_t i = 1; i < a.scores.size(); ++i) {
            CHECK(a.scores[i - 1].dissimilarity <= a.scores[i].dissimilarity);
            CHECK(b.scores[i - 1].dissimilarity <= b.scores[i].dissimilarity);
        }
        CHECK(a.scores.front().key() == g.records[3].key());
        CHECK(b.scores.front().key() == g.records[3].key());
        CHECK(a.scores.front().dissimilarity != b.scores.front().dissimilarity);
    }
    SUBCASE("exclude and unmatchable records") {
        Gallery h = g;
        BinaryMask lonely(200, 200);
        testing::fill_rect(lonely, 50, 50, 55, 55);
        h.records.push_back(make_record("Z", "s1", lonely));
        IdentifyOptions o;
        o.exclude = g.records[0].key();
        const auto r = identify(g.records[0].mask, h, Method::Icp, o);
        CHECK(r.scores.size() == g.size() - 1);
        for (const auto& s : r.scores) CHECK(s.key() != g.records[0].key());
        REQUIRE(r.unmatchable.size() == 1);
        CHECK(r.unmatchable[0].individual_id == "Z");
        CHECK_THROWS_AS(identify(g.records[0].mask, Gallery{}, Method::Icp), InvalidInput);
    }
    SUBCASE("result does not depend on the thread count") {
        const auto q = spots_mask(moved(extract_centroids(g.records[7].mask), -3, {0, 2}));
        IdentifyOptions one, many;
        one.threads = 1;
        many.threads = 4;
        for (auto m : {Method::Icp, Method::IcpProcrustes}) {
            const auto a = identify(q, g, m, one);
            const auto b = identify(q, g, m, many);
            CHECK(a.scores == b.scores);
        }
    }
    SUBCASE("ties break by key") {
        Gallery twins;
        twins.records.push_back(make_record("B", "s1", g.records[0].mask));
        twins.records.push_back(make_record("A", "s2", g.records[0].mask));
        twins.records.push_back(make_record("A", "s1", g.records[0].mask));
        const auto r = identify(g.records[0].mask, twins, Method::Icp);
        CHECK(r.scores[0].key() == gallery::ScaleKey{"A", "s1"});
        CHECK(r.scores[1].key() == gallery::ScaleKey{"A", "s2"});
        CHECK(r.scores[2].key() == gallery::ScaleKey{"B", "s1"});
    }
}

TEST_CASE("method names") {
    CHECK(parse_method("icp") == Method::Icp);
    CHECK(parse_method("icp-procrustes") == Method::IcpProcrustes);
    CHECK(parse_method("icp_procrustes") == Method::IcpProcrustes);
    CHECK(to_string(Method::IcpProcrustes) == "icp-procrustes");
    CHECK_THROWS_AS(parse_method("sift"), InvalidParameter);
}
