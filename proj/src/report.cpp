#include "spotid/report.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "spotid/errors.hpp"

namespace spotid::report {

json params_json(const segmentation::SegmentationParams& p) {
    return {
        {"median_window", p.median_window},
        {"gamma", p.gamma},
        {"cv_mu", p.cv_mu},
        {"cv_lambda1", p.cv_lambda1},
        {"cv_lambda2", p.cv_lambda2},
        {"cv_iterations", p.cv_iterations},
        {"cv_tol", p.cv_tol},
        {"area_min", p.area_min},
        {"area_max", p.area_max},
    };
}

segmentation::SegmentationParams params_from_json(const json& j, segmentation::SegmentationParams base) {
    if (!j.is_object()) throw InvalidParameter("segmentation params must be a JSON object");
    std::map<std::string, std::string> kv;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) {
            kv[key] = value.get<std::string>();
        } else if (value.is_number_integer()) {
            kv[key] = std::to_string(value.get<long long>());
        } else if (value.is_number()) {
            std::ostringstream os;
            os.precision(17);
            os << value.get<double>();
            kv[key] = os.str();
        } else {
            throw InvalidParameter("'" + key + "' must be a number");
        }
    }
    return segmentation::params_from_map(kv, base);
}

json cloud_json(const registration::SpotCloud& cloud) {
    json out = json::array();
    for (const auto& p : cloud.points) out.push_back({p.x(), p.y()});
    return out;
}

json score_json(const matching::MatchScore& s, std::size_t rank) {
    return {
        {"rank", rank},
        {"individual_id", s.individual_id},
        {"scale_id", s.scale_id},
        {"dissimilarity", s.dissimilarity},
        {"method", matching::to_string(s.method)},
    };
}

json ranked_json(const matching::RankedCandidates& r, std::size_t top) {
    json scores = json::array();
    const std::size_t n = top == 0 ? r.scores.size() : std::min(top, r.scores.size());
    for (std::size_t i = 0; i < n; ++i) scores.push_back(score_json(r.scores[i], i + 1));
    json skipped = json::array();
    for (const auto& k : r.unmatchable) skipped.push_back(k.label());
    return {{"query_id", r.query_id}, {"compared", r.scores.size()}, {"candidates", scores}, {"unmatchable", skipped}};
}

namespace {

json ms(const evaluation::MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}, {"count", m.count}}; }

void csv_row(std::ostringstream& os, const char* name, const evaluation::MeanStd& m) {
    os << name << ',' << m.mean << ',' << m.std << ',' << m.count << '\n';
}

// NaN/inf are not representable in JSON.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json summary_json(const evaluation::SegmentationSummary& s) {
    json hoover = json::array();
    for (std::size_t k = 0; k < s.tolerances.size(); ++k) {
        hoover.push_back({{"tolerance", s.tolerances[k]},
                          {"correct", s.correct[k]},
                          {"over", s.over[k]},
                          {"under", s.under[k]},
                          {"missed", s.missed[k]},
                          {"noise", s.noise[k]}});
    }
    return {
        {"images", s.images},
        {"counts", {{"tn", s.tn}, {"fn", s.fn}, {"fp", s.fp}, {"tp", s.tp}}},
        {"confusion_percent", {{"x11", ms(s.x11)}, {"x12", ms(s.x12)}, {"x21", ms(s.x21)}, {"x22", ms(s.x22)}}},
        {"precision", ms(s.precision)},
        {"recall", ms(s.recall)},
        {"f_measure", ms(s.f_measure)},
        {"hoover", hoover},
    };
}

std::string summary_csv(const evaluation::SegmentationSummary& s) {
    std::ostringstream os;
    os.precision(17);
    os << "statistic,mean,std,count\n";
    csv_row(os, "x11", s.x11);
    csv_row(os, "x12", s.x12);
    csv_row(os, "x21", s.x21);
    csv_row(os, "x22", s.x22);
    csv_row(os, "precision", s.precision);
    csv_row(os, "recall", s.recall);
    csv_row(os, "f_measure", s.f_measure);
    os << "\ncount,tn,fn,fp,tp\n";
    os << "pixels," << s.tn << ',' << s.fn << ',' << s.fp << ',' << s.tp << '\n';
    os << "\ntolerance,correct,over,under,missed,noise\n";
    for (std::size_t k = 0; k < s.tolerances.size(); ++k) {
        os << s.tolerances[k] << ',' << s.correct[k] << ',' << s.over[k] << ',' << s.under[k] << ','
           << s.missed[k] << ',' << s.noise[k] << '\n';
    }
    return os.str();
}

json identification_json(const evaluation::DissimilarityMatrix& m, int steps) {
    const auto roc = evaluation::far_frr(m, steps);
    json curve = json::array();
    for (std::size_t k = 0; k < roc.thresholds.size(); ++k) {
        curve.push_back({{"threshold", roc.thresholds[k]}, {"far", roc.far[k]}, {"frr", roc.frr[k]}});
    }
    const auto scores = evaluation::split_scores(m);
    return {
        {"scales", m.size()},
        {"genuine_pairs", scores.genuine.size()},
        {"impostor_pairs", scores.impostor.size()},
        {"eer", roc.eer},
        {"eer_threshold", number_or_null(roc.eer_threshold)},
        {"top1", evaluation::n_rank(m, 1)},
        {"top5", evaluation::n_rank(m, 5)},
        {"steps", steps},
        {"curve", curve},
    };
}

}  // namespace spotid::report
