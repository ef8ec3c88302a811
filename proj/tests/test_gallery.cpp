#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "spotid/errors.hpp"
#include "spotid/gallery.hpp"
#include "spotid/image_io.hpp"
#include "spotid/matching.hpp"
#include "spotid/synthetic.hpp"

using namespace spotid;
using namespace spotid::gallery;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

synthetic::Corpus small_corpus(int individuals = 2, int samples = 3, std::uint64_t seed = 1) {
    synthetic::CorpusParams p;
    p.individuals = individuals;
    p.samples_per = samples;
    p.seed = seed;
    return synthetic::generate_synthetic_corpus(p);
}

void check_same(const Gallery& a, const Gallery& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& x = a.records[i];
        const auto& y = b.records[i];
        CHECK(x.key() == y.key());
        CHECK(x.mask == y.mask);
        CHECK(x.cloud == y.cloud);
        CHECK(x.width == y.width);
        CHECK(x.height == y.height);
        CHECK(x.light_condition == y.light_condition);
        CHECK(x.provenance == y.provenance);
    }
}

}  // namespace

TEST_CASE("save and load round trip") {
    TempDir dir("spotid_gallery_rt");
    SUBCASE("empty manifest") {
        save_gallery(Gallery{}, dir.path);
        const auto g = load_gallery(dir.path);
        CHECK(g.empty());
    }
    SUBCASE("five records") {
        auto corpus = small_corpus(2, 3);
        corpus.gallery.records.pop_back();
        const auto saved = save_gallery(corpus.gallery, dir.path);
        const auto loaded = load_gallery(dir.path / kManifestName);
        check_same(corpus.gallery, loaded);
        CHECK(loaded.manifest_version == saved.manifest_version);
        // Saving what was loaded writes the same manifest.
        CHECK(manifest_json(loaded) == manifest_json(saved));
    }
    SUBCASE("missing mask is named") {
        const auto corpus = small_corpus(1, 2);
        const auto saved = save_gallery(corpus.gallery, dir.path);
        fs::remove(dir.path / saved.records[1].mask_path);
        try {
            load_gallery(dir.path);
            FAIL("expected a GalleryError");
        } catch (const GalleryError& e) {
            CHECK(std::string(e.what()).find(saved.records[1].key().label()) != std::string::npos);
        }
    }
    SUBCASE("cached cloud that disagrees with the mask") {
        const auto corpus = small_corpus(1, 2);
        const auto saved = save_gallery(corpus.gallery, dir.path);
        // Replace the mask with an empty one of the same size.
        imaging::write_mask_png(BinaryMask(saved.records[0].width, saved.records[0].height),
                                dir.path / saved.records[0].mask_path);
        CHECK_THROWS_AS(load_gallery(dir.path), GalleryError);
    }
    SUBCASE("malformed manifest") {
        std::ofstream(dir.path / kManifestName) << "{ not json";
        CHECK_THROWS_AS(load_gallery(dir.path), GalleryError);
    }
}

TEST_CASE("enrollment") {
    TempDir dir("spotid_gallery_enroll");
    const auto corpus = small_corpus(2, 2, 5);
    const auto& mask = corpus.gallery.records[0].mask;

    SUBCASE("in memory") {
        const auto g = enroll(Gallery{}, "A", mask);
        CHECK(g.size() == 1);
        CHECK(g.records[0].scale_id == "s1");
        const auto g2 = enroll(g, "A", corpus.gallery.records[1].mask);
        CHECK(g2.records[1].scale_id == "s2");
        CHECK(g2.manifest_version == g.manifest_version + 1);

        EnrollMetadata dup;
        dup.scale_id = "s1";
        CHECK_THROWS_AS(enroll(g2, "A", mask, dup), GalleryError);
        CHECK(g2.size() == 2);
        CHECK_THROWS_AS(enroll(g2, "bad id", mask), GalleryError);
    }
    SUBCASE("persisted, with a duplicate leaving disk untouched") {
        auto g = save_gallery(Gallery{}, dir.path);
        g = enroll(g, "A", mask);
        g = enroll(g, "B", corpus.gallery.records[2].mask);
        check_same(load_gallery(dir.path), g);

        const auto before = imaging::read_file(dir.path / kManifestName);
        EnrollMetadata dup;
        dup.scale_id = "s1";
        CHECK_THROWS_AS(enroll(g, "A", corpus.gallery.records[1].mask, dup), GalleryError);
        CHECK(imaging::read_file(dir.path / kManifestName) == before);
    }
    SUBCASE("stale writer loses") {
        const auto base = save_gallery(Gallery{}, dir.path);
        const auto first = enroll(base, "A", mask);
        CHECK_THROWS_AS(enroll(base, "B", mask), ConflictError);
        CHECK(read_manifest_version(dir.path) == first.manifest_version);
        CHECK(load_gallery(dir.path).size() == 1);
    }
    SUBCASE("enrolled mask identifies itself") {
        auto g = save_gallery(corpus.gallery, dir.path);
        g = enroll(g, "NEW", corpus.gallery.records[3].mask);
        const auto r = matching::identify(corpus.gallery.records[3].mask, g, matching::Method::IcpProcrustes);
        CHECK(r.scores.front().dissimilarity < 1e-9);
    }
}

TEST_CASE("ids and labels") {
    CHECK(valid_id("L001"));
    CHECK(valid_id("a.b-c"));
    CHECK_FALSE(valid_id(""));
    CHECK_FALSE(valid_id("a_b"));
    CHECK_FALSE(valid_id("a:b"));
    CHECK_FALSE(valid_id("../x"));
    CHECK(ScaleKey::parse_label("L1:s2") == ScaleKey{"L1", "s2"});
    CHECK_THROWS(ScaleKey::parse_label("L1"));
    CHECK(parse_light_condition(to_string(LightCondition::HardExposed)) == LightCondition::HardExposed);
    CHECK(parse_provenance(to_string(Provenance::Automatic)) == Provenance::Automatic);
}

TEST_CASE("synthetic corpus") {
    synthetic::CorpusParams p;
    p.individuals = 4;
    p.samples_per = 3;
    SUBCASE("fixed seed is bit identical") {
        const auto a = synthetic::generate_synthetic_corpus(p);
        const auto b = synthetic::generate_synthetic_corpus(p);
        check_same(a.gallery, b.gallery);
        CHECK(manifest_json(a.gallery) == manifest_json(b.gallery));
    }
    SUBCASE("no jitter and no motion gives identical samples") {
        p.jitter_sigma = 0;
        p.bounds = {0, 0};
        const auto c = synthetic::generate_synthetic_corpus(p);
        for (std::size_t i = 0; i < c.gallery.size(); i += 3) {
            CHECK(c.gallery.records[i].mask == c.gallery.records[i + 1].mask);
            CHECK(c.gallery.records[i].mask == c.gallery.records[i + 2].mask);
        }
    }
    SUBCASE("identity map and light cycle") {
        const auto c = synthetic::generate_synthetic_corpus(p);
        CHECK(c.identity.size() == 12);
        CHECK(c.gallery.records[0].light_condition == LightCondition::Normal);
        CHECK(c.gallery.records[1].light_condition == LightCondition::Ideal);
        CHECK(c.gallery.records[2].light_condition == LightCondition::HardExposed);
        for (const auto& r : c.gallery.records) {
            CHECK(c.identity.at(r.key()) == r.individual_id);
            CHECK(r.cloud.size() >= static_cast<std::size_t>(p.min_spots) - 1);
        }
    }
    SUBCASE("layout spacing") {
        const auto c = synthetic::poisson_disc_layout(30, 256, 256, 14, 32, 9);
        CHECK(c.size() == 30);
        for (std::size_t i = 0; i < c.size(); ++i) {
            CHECK((c[i].x() >= 32 && c[i].x() <= 224 && c[i].y() >= 32 && c[i].y() <= 224));
            for (std::size_t j = i + 1; j < c.size(); ++j) CHECK((c[i] - c[j]).norm() >= 14);
        }
    }
}
