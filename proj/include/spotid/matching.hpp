#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spotid/gallery.hpp"
#include "spotid/registration.hpp"

namespace spotid::matching {

using gallery::Gallery;
using gallery::GalleryRecord;
using gallery::ScaleKey;
using imaging::BinaryMask;
using registration::SpotCloud;

enum class Method { Icp, IcpProcrustes };

std::string_view to_string(Method m);
// Accepts "icp" and "icp-procrustes" (also "icp_procrustes").
Method parse_method(std::string_view s);

struct MatchOptions {
    registration::IcpOptions icp;
    // ICP score = objective / source point count; raw objective when false.
    bool icp_mean_residual = true;
};

struct MatchScore {
    std::string individual_id;
    std::string scale_id;
    double dissimilarity = 0.0;
    Method method = Method::Icp;

    ScaleKey key() const { return {individual_id, scale_id}; }
    friend bool operator==(const MatchScore&, const MatchScore&) = default;
};

// Everything needed to draw a candidate overlay.
struct MatchDetail {
    MatchScore score;
    SpotCloud query_cloud;    // query centroids in the record frame, before ICP
    SpotCloud aligned_query;  // after the ICP transform
    SpotCloud record_cloud;
    registration::RigidTransform transform;
    int icp_iterations = 0;
    // Number of one-to-one pairs fed to Procrustes (0 for plain ICP).
    std::size_t pairs = 0;
};

struct RankedCandidates {
    std::string query_id;
    // Ascending dissimilarity; ties by (individual_id, scale_id).
    std::vector<MatchScore> scores;
    // Records skipped because either side had fewer than two spots.
    std::vector<ScaleKey> unmatchable;
};

// One centroid per 8-connected component, (x, y) = mean (column, row),
// ordered by each component's topmost-leftmost pixel.
SpotCloud extract_centroids(const BinaryMask& mask);

// Nearest-neighbour resize. Throws InvalidParameter for a zero dimension.
BinaryMask normalize_mask(const BinaryMask& mask, int target_width, int target_height);

// Query is the ICP source, the record the target. Throws UnmatchableRecord
// when either cloud has fewer than two points.
MatchScore match_icp(const BinaryMask& query, const GalleryRecord& record, const MatchOptions& options = {});
MatchScore match_icp_procrustes(const BinaryMask& query, const GalleryRecord& record,
                                const MatchOptions& options = {});
MatchDetail match(const BinaryMask& query, const GalleryRecord& record, Method method,
                  const MatchOptions& options = {});

// The same as `match`, for a query cloud already in the record frame.
MatchDetail match_cloud(const SpotCloud& query_cloud, const GalleryRecord& record, Method method,
                        const MatchOptions& options = {});

void sort_scores(std::vector<MatchScore>& scores);

struct IdentifyOptions {
    MatchOptions match;
    std::optional<ScaleKey> exclude;
    // Worker threads across gallery records; 0 = hardware concurrency.
    unsigned threads = 0;
    std::string query_id = "query";
};

// Scores every gallery record except `exclude`. Throws InvalidInput on an
// empty gallery.
RankedCandidates identify(const BinaryMask& query, const Gallery& gallery, Method method,
                          const IdentifyOptions& options = {});

}  // namespace spotid::matching
