#include "spotid/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "spotid/errors.hpp"

namespace spotid::synthetic {

SpotCloud poisson_disc_layout(int count, int width, int height, double min_spacing, double margin,
                              std::uint64_t seed) {
    const double x0 = margin;
    const double x1 = width - margin;
    const double y0 = margin;
    const double y1 = height - margin;
    if (count < 0 || x1 <= x0 || y1 <= y0) throw InvalidParameter("layout region is empty");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(x0, x1);
    std::uniform_real_distribution<double> uy(y0, y1);
    SpotCloud cloud;
    const double min_d2 = min_spacing * min_spacing;
    const int max_attempts = 2000 * std::max(count, 1);
    for (int attempt = 0; attempt < max_attempts && static_cast<int>(cloud.size()) < count; ++attempt) {
        const registration::Point p(ux(rng), uy(rng));
        const bool clear = std::none_of(cloud.points.begin(), cloud.points.end(),
                                        [&](const registration::Point& q) { return (p - q).squaredNorm() < min_d2; });
        if (clear) cloud.points.push_back(p);
    }
    if (static_cast<int>(cloud.size()) < count) {
        throw InvalidParameter("cannot place " + std::to_string(count) + " spots with spacing " +
                               std::to_string(min_spacing) + " in a " + std::to_string(width) + "x" +
                               std::to_string(height) + " frame");
    }
    return cloud;
}

BinaryMask rasterize_spots(const SpotCloud& centres, double radius, int width, int height) {
    BinaryMask mask(width, height);
    const double r2 = radius * radius;
    const int reach = static_cast<int>(std::ceil(radius));
    for (const auto& c : centres.points) {
        if (c.x() < 0 || c.y() < 0 || c.x() > width - 1 || c.y() > height - 1) continue;
        const int cx = static_cast<int>(std::lround(c.x()));
        const int cy = static_cast<int>(std::lround(c.y()));
        for (int y = std::max(cy - reach - 1, 0); y <= std::min(cy + reach + 1, height - 1); ++y) {
            for (int x = std::max(cx - reach - 1, 0); x <= std::min(cx + reach + 1, width - 1); ++x) {
                const double dx = x - c.x();
                const double dy = y - c.y();
                if (dx * dx + dy * dy <= r2) mask.set(x, y);
            }
        }
    }
    return mask;
}

Corpus generate_synthetic_corpus(const CorpusParams& p) {
    if (p.individuals < 1 || p.samples_per < 1) throw InvalidParameter("corpus counts must be >= 1");
    if (p.min_spots < 2 || p.max_spots < p.min_spots) throw InvalidParameter("invalid spot count range");
    if (!(p.jitter_sigma >= 0.0)) throw InvalidParameter("jitter_sigma must be >= 0");
    if (!(p.spot_radius > 0.0)) throw InvalidParameter("spot_radius must be > 0");
    if (p.width < 1 || p.height < 1) throw InvalidParameter("corpus frame must be at least 1x1");

    std::mt19937_64 rng(p.seed);
    std::uniform_int_distribution<int> spot_count(p.min_spots, p.max_spots);
    std::uniform_real_distribution<double> rot(-p.bounds.max_rotation_deg, p.bounds.max_rotation_deg);
    std::uniform_real_distribution<double> shift(-p.bounds.max_translation_px, p.bounds.max_translation_px);
    std::normal_distribution<double> jitter(0.0, 1.0);
    static constexpr gallery::LightCondition kLight[] = {
        gallery::LightCondition::Normal, gallery::LightCondition::Ideal, gallery::LightCondition::HardExposed};

    const registration::Point centre((p.width - 1) / 2.0, (p.height - 1) / 2.0);
    Corpus corpus;
    for (int ind = 1; ind <= p.individuals; ++ind) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "L%03d", ind);
        const std::string id = buf;
        const SpotCloud layout =
            poisson_disc_layout(spot_count(rng), p.width, p.height, p.min_spacing, p.margin, rng());
        corpus.layouts[id] = layout;

        for (int s = 1; s <= p.samples_per; ++s) {
            const double angle = rot(rng) * std::numbers::pi / 180.0;
            const registration::Point t(shift(rng), shift(rng));
            // Rotate about the frame centre, then shift.
            const auto about_centre = registration::RigidTransform::from_angle(angle, centre + t)
                                          .compose(registration::RigidTransform::from_angle(0.0, -centre));
            SpotCloud sample;
            for (const auto& q : layout.points) {
                registration::Point j = q;
                if (p.jitter_sigma > 0.0) {
                    j += registration::Point(jitter(rng), jitter(rng)) * p.jitter_sigma;
                }
                sample.points.push_back(about_centre.apply(j));
            }
            const std::string scale_id = "s" + std::to_string(s);
            auto record = gallery::make_record(id, scale_id, rasterize_spots(sample, p.spot_radius, p.width, p.height),
                                               kLight[(s - 1) % 3], gallery::Provenance::GroundTruth);
            corpus.identity[record.key()] = id;
            corpus.gallery.records.push_back(std::move(record));
        }
    }
    return corpus;
}

ScalePhoto render_scale_photo(const SpotCloud& centres, double radius, int width, int height,
                              Lighting lighting, std::uint64_t seed) {
    ScalePhoto out;
    out.ground_truth = rasterize_spots(centres, radius, width, height);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.015);

    std::vector<imaging::Rgb> px(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const bool exposed = lighting == Lighting::HalfExposed && x >= width / 2;
            const bool spot = out.ground_truth.test(x, y);
            double v = 0.0;
            if (exposed) {
                v = spot ? 0.98 : 0.30;
            } else {
                v = spot ? 0.45 : 0.10;
            }
            v = std::clamp(v + noise(rng), 0.0, 1.0);
            // Slightly warm tint; luma stays close to v.
            px[static_cast<std::size_t>(y) * width + x] = {std::clamp(v * 1.05, 0.0, 1.0), v,
                                                           std::clamp(v * 0.85, 0.0, 1.0)};
        }
    }
    out.image = RgbImage(width, height, std::move(px));
    return out;
}

}  // namespace spotid::synthetic
