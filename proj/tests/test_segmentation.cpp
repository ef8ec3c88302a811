#include <doctest.h>

#include "spotid/components.hpp"
#include "spotid/errors.hpp"
#include "spotid/segmentation.hpp"
#include "spotid/synthetic.hpp"
#include "support.hpp"

using namespace spotid;
using namespace spotid::imaging;
using segmentation::SegmentationParams;

namespace {

GrayImage disk_image(int w, int h, double cx, double cy, double r, double fg, double bg) {
    GrayImage g(w, h, bg);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) g.at(x, y) = fg;
    return g;
}

BinaryMask threshold(const GrayImage& g, double t) {
    BinaryMask m(g.width(), g.height());
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) m.set(x, y, g.at(x, y) > t);
    return m;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a.data()[i] && b.data()[i];
        uni += a.data()[i] || b.data()[i];
    }
    return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

RgbImage to_rgb(const GrayImage& g) {
    std::vector<Rgb> px;
    for (double v : g.data()) px.push_back({v, v, v});
    return RgbImage(g.width(), g.height(), px);
}

}  // namespace

TEST_CASE("active contours on a disk") {
    const auto img = disk_image(64, 64, 31.5, 31.5, 12, 0.9, 0.1);
    segmentation::ActiveContourTrace trace;
    const auto m = segmentation::active_contours(img, SegmentationParams{}, &trace);
    CHECK(iou(m, threshold(img, 0.5)) >= 0.95);
    CHECK(trace.iterations <= SegmentationParams{}.cv_iterations);
}

TEST_CASE("active contours keep two disks apart") {
    auto img = disk_image(96, 64, 24, 32, 10, 0.9, 0.1);
    const auto second = disk_image(96, 64, 70, 32, 10, 0.9, 0.1);
    for (std::size_t i = 0; i < img.size(); ++i) img.data()[i] = std::max(img.data()[i], second.data()[i]);
    const auto m = segmentation::active_contours(img, SegmentationParams{});
    CHECK(testing::oracle_regions(m).second == 2);
}

TEST_CASE("active contours on a uniform image terminate") {
    SegmentationParams p;
    segmentation::ActiveContourTrace trace;
    const auto m = segmentation::active_contours(GrayImage(40, 30, 0.5), p, &trace);
    CHECK((m.count() == 0 || m.count() == m.size()));
    CHECK(trace.iterations <= p.cv_iterations);
}

TEST_CASE("area opening") {
    CHECK(segmentation::area_open(BinaryMask(20, 20), 1, 100) == BinaryMask(20, 20));

    // Components of 3, 50 and 5000 pixels with band [10, 1000].
    BinaryMask m(120, 80);
    testing::fill_rect(m, 0, 0, 3, 1);
    testing::fill_rect(m, 10, 0, 20, 5);
    testing::fill_rect(m, 0, 10, 100, 60);
    BinaryMask want(120, 80);
    testing::fill_rect(want, 10, 0, 20, 5);
    CHECK(segmentation::area_open(m, 10, 1000) == want);
    CHECK(segmentation::area_open(m, 1, 10000) == m);

    // Survivors always lie inside the band.
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
        const auto r = testing::random_mask(30, 30, 0.35, rng);
        const auto out = segmentation::area_open(r, 4, 40);
        for (auto a : label_components(out).areas) CHECK((a >= 4 && a <= 40));
        for (std::size_t i = 0; i < out.size(); ++i) CHECK((!out.data()[i] || r.data()[i]));
        CHECK(segmentation::area_open(out, 4, 40) == out);
    }
}

TEST_CASE("two-thread pipeline") {
    SegmentationParams p;
    SUBCASE("all-black image gives an empty mask") {
        const auto r = segmentation::segment_scale(RgbImage(48, 48), p);
        CHECK(r.mask.count() == 0);
    }
    SUBCASE("half-exposed photo: spots found on both halves") {
        const auto centres = synthetic::poisson_disc_layout(14, 160, 160, 24, 12, 3);
        const auto photo =
            synthetic::render_scale_photo(centres, 6, 160, 160, synthetic::Lighting::HalfExposed, 3);
        const auto r = segmentation::segment_scale(photo.image, p);
        CHECK(r.mask == (r.dark_thread_mask | r.bright_thread_mask));
        for (int half = 0; half < 2; ++half) {
            long tp = 0, pos = 0;
            for (int y = 0; y < 160; ++y)
                for (int x = half * 80; x < half * 80 + 80; ++x) {
                    if (!photo.ground_truth.test(x, y)) continue;
                    ++pos;
                    tp += r.mask.test(x, y);
                }
            REQUIRE(pos > 0);
            CHECK(static_cast<double>(tp) / static_cast<double>(pos) >= 0.8);
        }
        for (auto a : label_components(r.dark_thread_mask).areas) CHECK((a >= p.area_min && a <= p.area_max));
        for (auto a : label_components(r.bright_thread_mask).areas) CHECK((a >= p.area_min && a <= p.area_max));
    }
    SUBCASE("concurrent and sequential runs agree bit for bit") {
        const auto img = to_rgb(disk_image(64, 48, 20, 20, 8, 0.8, 0.2));
        const auto a = segmentation::segment_scale(img, p, true);
        const auto b = segmentation::segment_scale(img, p, false);
        CHECK(a.mask == b.mask);
        CHECK(a.dark_thread_mask == b.dark_thread_mask);
        CHECK(a.bright_thread_mask == b.bright_thread_mask);
        CHECK(a.params_used == p);
    }
}

TEST_CASE("parameter validation and parsing") {
    SegmentationParams p;
    p.gamma = 0;
    CHECK_THROWS_AS(p.validate(), InvalidParameter);
    p = {};
    p.median_window = 4;
    CHECK_THROWS_AS(p.validate(), InvalidParameter);
    p = {};
    p.area_min = 50;
    p.area_max = 10;
    CHECK_THROWS_AS(p.validate(), InvalidParameter);

    const auto parsed = segmentation::parse_params("# tuned\nmedian_window = 3\n  gamma=1.8 # brighter\n\ncv_mu = 0.1\n");
    CHECK(parsed.median_window == 3);
    CHECK(parsed.gamma == 1.8);
    CHECK(parsed.cv_mu == 0.1);
    CHECK(parsed.cv_iterations == SegmentationParams{}.cv_iterations);

    CHECK_THROWS_AS(segmentation::parse_params("no_such_key = 1"), InvalidParameter);
    CHECK_THROWS_AS(segmentation::parse_params("gamma = abc"), InvalidParameter);
    CHECK_THROWS_AS(segmentation::parse_params("gamma 2"), InvalidParameter);

    const SegmentationParams d;
    CHECK(segmentation::params_from_map(segmentation::params_to_map(d)) == d);
}
