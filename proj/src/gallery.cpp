#include "spotid/gallery.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spotid/errors.hpp"
#include "spotid/image_io.hpp"
#include "spotid/matching.hpp"

namespace spotid::gallery {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(LightCondition c) {
    switch (c) {
        case LightCondition::Normal: return "normal";
        case LightCondition::Ideal: return "ideal";
        case LightCondition::HardExposed: return "hard_exposed";
    }
    return "normal";
}

std::string_view to_string(Provenance p) {
    return p == Provenance::GroundTruth ? "ground_truth" : "automatic";
}

LightCondition parse_light_condition(std::string_view s) {
    if (s == "normal") return LightCondition::Normal;
    if (s == "ideal") return LightCondition::Ideal;
    if (s == "hard_exposed") return LightCondition::HardExposed;
    throw InvalidParameter("unknown light condition '" + std::string(s) + "'");
}

Provenance parse_provenance(std::string_view s) {
    if (s == "ground_truth") return Provenance::GroundTruth;
    if (s == "automatic") return Provenance::Automatic;
    throw InvalidParameter("unknown provenance '" + std::string(s) + "'");
}

ScaleKey ScaleKey::parse_label(std::string_view label) {
    const auto colon = label.find(':');
    if (colon == std::string_view::npos || label.find(':', colon + 1) != std::string_view::npos) {
        throw InvalidInput("label '" + std::string(label) + "' is not individual:scale");
    }
    ScaleKey key{std::string(label.substr(0, colon)), std::string(label.substr(colon + 1))};
    if (!valid_id(key.individual_id) || !valid_id(key.scale_id)) {
        throw InvalidInput("label '" + std::string(label) + "' has an invalid id");
    }
    return key;
}

bool valid_id(std::string_view id) {
    if (id.empty()) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
               c == '.';
    });
}

const GalleryRecord* Gallery::find(const ScaleKey& key) const {
    for (const auto& r : records) {
        if (r.individual_id == key.individual_id && r.scale_id == key.scale_id) return &r;
    }
    return nullptr;
}

std::vector<std::string> Gallery::individuals() const {
    std::vector<std::string> out;
    for (const auto& r : records) {
        if (std::find(out.begin(), out.end(), r.individual_id) == out.end()) out.push_back(r.individual_id);
    }
    return out;
}

GalleryRecord make_record(std::string individual_id, std::string scale_id, BinaryMask mask,
                          LightCondition light, Provenance provenance) {
    if (!valid_id(individual_id)) throw GalleryError("invalid individual id '" + individual_id + "'");
    if (!valid_id(scale_id)) throw GalleryError("invalid scale id '" + scale_id + "'");
    if (mask.empty()) throw GalleryError("record " + individual_id + ":" + scale_id + " has no mask");
    GalleryRecord r;
    r.individual_id = std::move(individual_id);
    r.scale_id = std::move(scale_id);
    r.width = mask.width();
    r.height = mask.height();
    r.cloud = matching::extract_centroids(mask);
    r.mask = std::move(mask);
    r.light_condition = light;
    r.provenance = provenance;
    return r;
}

namespace {

std::string file_stem(const GalleryRecord& r) { return r.individual_id + "_" + r.scale_id; }
std::string mask_rel(const GalleryRecord& r) { return "masks/" + file_stem(r) + ".png"; }
std::string cloud_rel(const GalleryRecord& r) { return "clouds/" + file_stem(r) + ".csv"; }

json manifest_document(const Gallery& g) {
    json individuals = json::array();
    std::vector<std::string> order = g.individuals();
    for (const auto& id : order) {
        json scales = json::array();
        for (const auto& r : g.records) {
            if (r.individual_id != id) continue;
            scales.push_back({
                {"scale_id", r.scale_id},
                {"mask", r.mask_path.empty() ? mask_rel(r) : r.mask_path},
                {"cloud", cloud_rel(r)},
                {"width", r.width},
                {"height", r.height},
                {"light_condition", std::string(to_string(r.light_condition))},
                {"provenance", std::string(to_string(r.provenance))},
            });
        }
        individuals.push_back({{"individual_id", id}, {"scales", std::move(scales)}});
    }
    return {{"format", "spotid-gallery"},
            {"manifest_version", g.manifest_version},
            {"individuals", std::move(individuals)}};
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw GalleryError("cannot write " + tmp.string());
        out << text;
        if (!out) throw GalleryError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

void persist_record_files(const fs::path& root, const GalleryRecord& r) {
    imaging::write_mask_png(r.mask, root / mask_rel(r));
    registration::write_cloud_csv(r.cloud, root / cloud_rel(r));
}

bool clouds_agree(const SpotCloud& a, const SpotCloud& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if ((a[i] - b[i]).cwiseAbs().maxCoeff() > 1e-9) return false;
    }
    return true;
}

// Exclusive advisory lock on <root>/.lock, released on destruction or
// process exit.
class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& root) {
        const fs::path p = root / ".lock";
        fd_ = ::open(p.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw GalleryError("cannot open lock file " + p.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw GalleryError("cannot lock " + p.string());
        }
    }
    ~DirectoryLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    int fd_ = -1;
};

json read_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw GalleryError("cannot read manifest " + manifest.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw GalleryError("malformed manifest " + manifest.string() + ": " + e.what());
    }
}

}  // namespace

std::string manifest_json(const Gallery& gallery) { return manifest_document(gallery).dump(2) + "\n"; }

std::int64_t read_manifest_version(const fs::path& root) {
    const json doc = read_manifest(root / kManifestName);
    try {
        return doc.at("manifest_version").get<std::int64_t>();
    } catch (const json::exception& e) {
        throw GalleryError("manifest has no valid manifest_version: " + std::string(e.what()));
    }
}

Gallery load_gallery(const fs::path& manifest_or_dir) {
    const bool is_dir = fs::is_directory(manifest_or_dir);
    const fs::path manifest = is_dir ? manifest_or_dir / kManifestName : manifest_or_dir;
    const fs::path root = is_dir ? manifest_or_dir : manifest_or_dir.parent_path();
    const json doc = read_manifest(manifest);

    Gallery g;
    g.root = root;
    std::set<ScaleKey> seen;
    try {
        g.manifest_version = doc.at("manifest_version").get<std::int64_t>();
        for (const auto& ind : doc.at("individuals")) {
            const auto individual_id = ind.at("individual_id").get<std::string>();
            for (const auto& sc : ind.at("scales")) {
                const auto scale_id = sc.at("scale_id").get<std::string>();
                const std::string name = individual_id + ":" + scale_id;
                if (!valid_id(individual_id) || !valid_id(scale_id)) {
                    throw GalleryError("record " + name + ": invalid id");
                }
                if (!seen.insert({individual_id, scale_id}).second) {
                    throw GalleryError("record " + name + ": duplicate (individual, scale)");
                }

                const auto mask_path = sc.at("mask").get<std::string>();
                const fs::path mask_file = root / mask_path;
                if (!fs::exists(mask_file)) {
                    throw GalleryError("record " + name + ": mask file missing: " + mask_file.string());
                }
                BinaryMask mask;
                try {
                    mask = imaging::read_mask(mask_file);
                } catch (const Error& e) {
                    throw GalleryError("record " + name + ": " + e.what());
                }
                const int width = sc.at("width").get<int>();
                const int height = sc.at("height").get<int>();
                if (mask.width() != width || mask.height() != height) {
                    throw GalleryError("record " + name + ": mask is " + std::to_string(mask.width()) + "x" +
                                       std::to_string(mask.height()) + ", manifest says " +
                                       std::to_string(width) + "x" + std::to_string(height));
                }

                GalleryRecord r = make_record(individual_id, scale_id, std::move(mask),
                                              parse_light_condition(sc.value("light_condition", "normal")),
                                              parse_provenance(sc.value("provenance", "ground_truth")));
                r.mask_path = mask_path;

                if (sc.contains("cloud")) {
                    const fs::path cloud_file = root / sc.at("cloud").get<std::string>();
                    SpotCloud cached;
                    try {
                        cached = registration::read_cloud_csv(cloud_file);
                    } catch (const Error& e) {
                        throw GalleryError("record " + name + ": " + e.what());
                    }
                    if (!clouds_agree(cached, r.cloud)) {
                        throw GalleryError("record " + name + ": cached cloud does not match mask centroids");
                    }
                }
                g.records.push_back(std::move(r));
            }
        }
    } catch (const json::exception& e) {
        throw GalleryError("malformed manifest " + manifest.string() + ": " + e.what());
    } catch (const InvalidParameter& e) {
        throw GalleryError("malformed manifest " + manifest.string() + ": " + e.what());
    }
    return g;
}

Gallery save_gallery(const Gallery& gallery, const fs::path& dir) {
    fs::create_directories(dir);
    Gallery out = gallery;
    out.root = dir;
    for (auto& r : out.records) {
        r.mask_path = mask_rel(r);
        persist_record_files(dir, r);
    }
    write_text_atomic(dir / kManifestName, manifest_json(out));
    return out;
}

Gallery enroll(const Gallery& gallery, const std::string& individual_id, const BinaryMask& mask,
               const EnrollMetadata& metadata) {
    std::string scale_id;
    if (metadata.scale_id) {
        scale_id = *metadata.scale_id;
    } else {
        int k = 1;
        while (gallery.find({individual_id, "s" + std::to_string(k)})) ++k;
        scale_id = "s" + std::to_string(k);
    }
    if (gallery.find({individual_id, scale_id})) {
        throw GalleryError("record " + individual_id + ":" + scale_id + " already enrolled");
    }

    Gallery out = gallery;
    GalleryRecord r = make_record(individual_id, scale_id, mask, metadata.light_condition, metadata.provenance);
    r.mask_path = mask_rel(r);
    out.records.push_back(std::move(r));
    out.manifest_version = gallery.manifest_version + 1;

    if (!gallery.root.empty()) {
        fs::create_directories(gallery.root);
        DirectoryLock lock(gallery.root);
        const bool has_manifest = fs::exists(gallery.root / kManifestName);
        const std::int64_t on_disk = has_manifest ? read_manifest_version(gallery.root) : 0;
        if (on_disk != gallery.manifest_version) {
            throw ConflictError("gallery manifest_version is " + std::to_string(on_disk) + ", expected " +
                                std::to_string(gallery.manifest_version));
        }
        persist_record_files(gallery.root, out.records.back());
        write_text_atomic(gallery.root / kManifestName, manifest_json(out));
    }
    return out;
}

}  // namespace spotid::gallery
