#include "spotid/matching.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "spotid/components.hpp"
#include "spotid/errors.hpp"
#include "spotid/parallel.hpp"

namespace spotid::matching {

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Icp: return "icp";
        case Method::IcpProcrustes: return "icp-procrustes";
    }
    return "icp";
}

Method parse_method(std::string_view s) {
    if (s == "icp") return Method::Icp;
    if (s == "icp-procrustes" || s == "icp_procrustes") return Method::IcpProcrustes;
    throw InvalidParameter("unknown matching method '" + std::string(s) + "'");
}

SpotCloud extract_centroids(const BinaryMask& mask) {
    const auto comps = imaging::label_components(mask);
    std::vector<double> sx(comps.areas.size(), 0.0);
    std::vector<double> sy(comps.areas.size(), 0.0);
    for (int y = 0; y < comps.height; ++y) {
        for (int x = 0; x < comps.width; ++x) {
            const auto label = comps.at(x, y);
            if (label == 0) continue;
            sx[static_cast<std::size_t>(label - 1)] += x;
            sy[static_cast<std::size_t>(label - 1)] += y;
        }
    }
    SpotCloud cloud;
    cloud.points.reserve(comps.areas.size());
    for (std::size_t k = 0; k < comps.areas.size(); ++k) {
        const auto area = static_cast<double>(comps.areas[k]);
        cloud.points.emplace_back(sx[k] / area, sy[k] / area);
    }
    return cloud;
}

BinaryMask normalize_mask(const BinaryMask& mask, int target_width, int target_height) {
    return imaging::resize_nearest(mask, target_width, target_height);
}

MatchDetail match_cloud(const SpotCloud& query_cloud, const GalleryRecord& record, Method method,
                        const MatchOptions& options) {
    if (query_cloud.size() < 2) {
        throw UnmatchableRecord(record.individual_id, record.scale_id,
                                "query has " + std::to_string(query_cloud.size()) + " spot(s)");
    }
    if (record.cloud.size() < 2) {
        throw UnmatchableRecord(record.individual_id, record.scale_id,
                                "record has " + std::to_string(record.cloud.size()) + " spot(s)");
    }

    MatchDetail detail;
    detail.query_cloud = query_cloud;
    detail.record_cloud = record.cloud;
    detail.score.individual_id = record.individual_id;
    detail.score.scale_id = record.scale_id;
    detail.score.method = method;

    const auto fit = registration::icp(query_cloud, record.cloud, options.icp);
    detail.transform = fit.transform;
    detail.icp_iterations = fit.iterations;
    detail.aligned_query = fit.transform.apply(query_cloud);

    if (method == Method::Icp) {
        detail.score.dissimilarity =
            options.icp_mean_residual ? fit.objective / static_cast<double>(query_cloud.size()) : fit.objective;
        return detail;
    }

    const auto pairs = registration::one_to_one_assign(detail.aligned_query, record.cloud);
    std::vector<registration::Point> reference;
    std::vector<registration::Point> moving;
    reference.reserve(pairs.size());
    moving.reserve(pairs.size());
    for (const auto& a : pairs) {
        reference.push_back(record.cloud[a.target_index]);
        moving.push_back(detail.aligned_query[a.source_index]);
    }
    detail.pairs = pairs.size();
    try {
        detail.score.dissimilarity = registration::procrustes(reference, moving).dissimilarity;
    } catch (const InvalidInput& e) {
        throw UnmatchableRecord(record.individual_id, record.scale_id, e.what());
    }
    return detail;
}

MatchDetail match(const BinaryMask& query, const GalleryRecord& record, Method method,
                  const MatchOptions& options) {
    const SpotCloud cloud = extract_centroids(normalize_mask(query, record.width, record.height));
    return match_cloud(cloud, record, method, options);
}

MatchScore match_icp(const BinaryMask& query, const GalleryRecord& record, const MatchOptions& options) {
    return match(query, record, Method::Icp, options).score;
}

MatchScore match_icp_procrustes(const BinaryMask& query, const GalleryRecord& record,
                                const MatchOptions& options) {
    return match(query, record, Method::IcpProcrustes, options).score;
}

void sort_scores(std::vector<MatchScore>& scores) {
    std::sort(scores.begin(), scores.end(), [](const MatchScore& a, const MatchScore& b) {
        if (a.dissimilarity != b.dissimilarity) return a.dissimilarity < b.dissimilarity;
        return a.key() < b.key();
    });
}

RankedCandidates identify(const BinaryMask& query, const Gallery& gallery, Method method,
                          const IdentifyOptions& options) {
    if (gallery.empty()) throw InvalidInput("identify: gallery is empty");

    std::vector<const GalleryRecord*> todo;
    for (const auto& r : gallery.records) {
        if (options.exclude && r.key() == *options.exclude) continue;
        todo.push_back(&r);
    }

    // Query centroids depend only on the record dimensions.
    std::map<std::pair<int, int>, SpotCloud> query_clouds;
    for (const auto* r : todo) {
        const auto dims = std::make_pair(r->width, r->height);
        if (!query_clouds.contains(dims)) {
            query_clouds.emplace(dims, extract_centroids(normalize_mask(query, r->width, r->height)));
        }
    }

    std::vector<std::optional<MatchScore>> slots(todo.size());
    parallel_for(todo.size(), options.threads, [&](std::size_t i) {
        const GalleryRecord& r = *todo[i];
        try {
            slots[i] = match_cloud(query_clouds.at({r.width, r.height}), r, method, options.match).score;
        } catch (const UnmatchableRecord&) {
            slots[i].reset();
        }
    });

    RankedCandidates out;
    out.query_id = options.query_id;
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (slots[i]) {
            out.scores.push_back(std::move(*slots[i]));
        } else {
            out.unmatchable.push_back(todo[i]->key());
        }
    }
    sort_scores(out.scores);
    std::sort(out.unmatchable.begin(), out.unmatchable.end());
    return out;
}

}  // namespace spotid::matching
