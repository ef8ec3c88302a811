#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spotid/imaging.hpp"
#include "spotid/registration.hpp"

namespace spotid::gallery {

using imaging::BinaryMask;
using registration::SpotCloud;

enum class LightCondition { Normal, Ideal, HardExposed };
enum class Provenance { GroundTruth, Automatic };

std::string_view to_string(LightCondition c);
std::string_view to_string(Provenance p);
LightCondition parse_light_condition(std::string_view s);
Provenance parse_provenance(std::string_view s);

// Identifies one enrolled scale sample. Ordered lexicographically by
// (individual_id, scale_id), which is also the ranking tie-break order.
struct ScaleKey {
    std::string individual_id;
    std::string scale_id;

    std::string label() const { return individual_id + ":" + scale_id; }
    static ScaleKey parse_label(std::string_view label);

    friend auto operator<=>(const ScaleKey&, const ScaleKey&) = default;
    friend bool operator==(const ScaleKey&, const ScaleKey&) = default;
};

// Ids are non-empty and limited to [A-Za-z0-9.-], so that the
// `<individual>_<scale>` file stem and the `individual:scale` label are
// unambiguous.
bool valid_id(std::string_view id);

struct GalleryRecord {
    std::string individual_id;
    std::string scale_id;
    // Relative to the gallery root; empty for records not yet persisted.
    std::string mask_path;
    BinaryMask mask;
    SpotCloud cloud;
    int width = 0;
    int height = 0;
    LightCondition light_condition = LightCondition::Normal;
    Provenance provenance = Provenance::GroundTruth;

    ScaleKey key() const { return {individual_id, scale_id}; }
};

struct Gallery {
    // Directory holding manifest.json; empty for an in-memory gallery.
    std::filesystem::path root;
    std::vector<GalleryRecord> records;
    std::int64_t manifest_version = 0;

    bool empty() const noexcept { return records.empty(); }
    std::size_t size() const noexcept { return records.size(); }
    const GalleryRecord* find(const ScaleKey& key) const;
    std::vector<std::string> individuals() const;
};

inline constexpr std::string_view kManifestName = "manifest.json";

// Builds a validated record from a mask (cloud and dimensions derived).
GalleryRecord make_record(std::string individual_id, std::string scale_id, BinaryMask mask,
                          LightCondition light = LightCondition::Normal,
                          Provenance provenance = Provenance::GroundTruth);

// Accepts either the gallery directory or the manifest file path. Every
// record is verified: mask file present and decodable, dimensions as
// declared, cached cloud equal to the recomputed centroids. Throws
// GalleryError naming the offending record.
Gallery load_gallery(const std::filesystem::path& manifest_or_dir);

// Writes masks, clouds and the manifest under `dir`; returns the gallery
// re-rooted there with relative paths filled in.
Gallery save_gallery(const Gallery& gallery, const std::filesystem::path& dir);

std::string manifest_json(const Gallery& gallery);

struct EnrollMetadata {
    // Next free "s<k>" for the individual when absent.
    std::optional<std::string> scale_id;
    LightCondition light_condition = LightCondition::Normal;
    Provenance provenance = Provenance::GroundTruth;
};

// Appends a record and bumps manifest_version. For a persisted gallery the
// mask, cloud and manifest are written under an exclusive file lock, and
// the on-disk manifest_version must still equal gallery.manifest_version
// (otherwise ConflictError). Duplicate keys throw GalleryError and leave
// both the gallery and the directory unchanged.
Gallery enroll(const Gallery& gallery, const std::string& individual_id, const BinaryMask& mask,
               const EnrollMetadata& metadata = {});

// Reads only the manifest_version field of a persisted gallery.
std::int64_t read_manifest_version(const std::filesystem::path& root);

}  // namespace spotid::gallery
