#pragma once

#include <string>

#include <json.hpp>

#include "spotid/evaluation.hpp"
#include "spotid/matching.hpp"
#include "spotid/segmentation.hpp"

// JSON / CSV documents shared by the CLI and the HTTP service.
namespace spotid::report {

using nlohmann::json;

json params_json(const segmentation::SegmentationParams& p);
// Accepts numbers or numeric strings; unknown keys are rejected.
segmentation::SegmentationParams params_from_json(const json& j,
                                                  segmentation::SegmentationParams base = {});

json cloud_json(const registration::SpotCloud& cloud);
json score_json(const matching::MatchScore& s, std::size_t rank);
// At most `top` scores (all when 0), plus the skipped records.
json ranked_json(const matching::RankedCandidates& r, std::size_t top = 0);

json summary_json(const evaluation::SegmentationSummary& s);
// One row per statistic: name,mean,std,count; then the Hoover table.
std::string summary_csv(const evaluation::SegmentationSummary& s);

json identification_json(const evaluation::DissimilarityMatrix& m, int steps = 1000);

}  // namespace spotid::report
