#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spotid/gallery.hpp"
#include "spotid/imaging.hpp"
#include "spotid/matching.hpp"

namespace spotid::evaluation {

using gallery::Gallery;
using gallery::ScaleKey;
using imaging::BinaryMask;

// Pixel confusion between a ground-truth and a segmented mask. Percentages
// are column-normalized over the ground-truth class: x11 background kept as
// background, x21 background labelled foreground, x12 foreground labelled
// background, x22 foreground kept. A column whose ground-truth class has no
// pixels is undefined (nullopt).
struct ConfusionMatrix2x2 {
    std::int64_t tn = 0;
    std::int64_t fn = 0;
    std::int64_t fp = 0;
    std::int64_t tp = 0;
    std::optional<double> x11;
    std::optional<double> x12;
    std::optional<double> x21;
    std::optional<double> x22;
};

ConfusionMatrix2x2 confusion(const BinaryMask& gt, const BinaryMask& seg);

// Foreground is the positive class. Undefined ratios are nullopt.
struct Prf {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f_measure;
};

Prf prf(const ConfusionMatrix2x2& counts);

struct HooverPoint {
    double tolerance = 0.0;
    // GT regions per class; these four sum to gt_regions.
    int correct = 0;
    int over = 0;
    int under = 0;
    int missed = 0;
    // Machine regions in no class.
    int noise = 0;
    int gt_regions = 0;
    int machine_regions = 0;

    // Fractions of GT regions (0 when there are none).
    double correct_fraction() const;
    double over_fraction() const;
    double under_fraction() const;
    double missed_fraction() const;
    // Fraction of machine regions (0 when there are none).
    double noise_fraction() const;
};

struct HooverCurves {
    std::vector<HooverPoint> points;
};

// Region-level comparison over 8-connected components. Tolerances must lie in
// (0.5, 1]. Precedence: correct detection, then over-, then under-segmentation;
// what remains is missed (GT) or noise (machine).
HooverCurves hoover(const BinaryMask& gt, const BinaryMask& seg, const std::vector<double>& tolerances);

// Default tolerance grid 0.51, 0.55, 0.60, ..., 1.00.
std::vector<double> default_hoover_tolerances();

struct DissimilarityMatrix {
    std::vector<ScaleKey> labels;
    // Row-major; values[i * n + j] scores source i against target j. NaN
    // marks the excluded diagonal and unmatchable cells.
    std::vector<double> values;

    std::size_t size() const noexcept { return labels.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * labels.size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * labels.size() + j]; }
    // Diagonal, NaN and anything else that must not enter the metrics.
    bool excluded(std::size_t i, std::size_t j) const;
};

struct MatrixOptions {
    matching::MatchOptions match;
    unsigned threads = 0;
};

// value(i, j) = match score of source scale i (query mask) against target
// scale j (record). Both galleries must hold the same (individual, scale)
// roster; labels are sorted. Throws InvalidInput on a roster mismatch.
DissimilarityMatrix build_dissimilarity_matrix(const Gallery& source, const Gallery& target,
                                               matching::Method method, const MatrixOptions& options = {});

// CSV: first row is an empty cell followed by the column labels; each row
// starts with its label. Excluded cells are written empty.
std::string matrix_to_csv(const DissimilarityMatrix& m);
DissimilarityMatrix matrix_from_csv(const std::string& text);

struct ScoreSets {
    std::vector<double> genuine;
    std::vector<double> impostor;
};

// Directed off-diagonal pairs; same individual = genuine.
ScoreSets split_scores(const DissimilarityMatrix& m);

struct RocCurves {
    std::vector<double> thresholds;
    std::vector<double> far;
    std::vector<double> frr;
    double eer = 0.0;
    double eer_threshold = 0.0;
};

// FAR(t) = impostor scores <= t over impostors, FRR(t) = genuine scores > t
// over genuines, on `steps` uniform thresholds over [0, max score]. EER is
// the linearly interpolated crossover between consecutive distinct scores,
// so it does not depend on `steps`. Throws InvalidInput without genuine or
// impostor scores.
RocCurves far_frr(const DissimilarityMatrix& m, int steps = 1000);
RocCurves far_frr(const ScoreSets& scores, int steps = 1000);
// Thresholds at 0 and at every distinct score.
RocCurves far_frr_exact(const ScoreSets& scores);

// Fraction of queries whose individual appears among the n lowest
// dissimilarities of its row (self excluded, ties by label). Throws
// InvalidInput naming every individual with fewer than two scales.
double n_rank(const DissimilarityMatrix& m, int n);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
    int count = 0;
};

MeanStd mean_std(const std::vector<double>& values);

struct SegmentationSummary {
    int images = 0;
    // Raw pixel counts pooled over all images.
    std::int64_t tn = 0, fn = 0, fp = 0, tp = 0;
    MeanStd x11, x12, x21, x22;
    MeanStd precision, recall, f_measure;
    // Per-tolerance mean of the per-image Hoover fractions.
    std::vector<double> tolerances;
    std::vector<double> correct, over, under, missed, noise;
};

struct MaskPair {
    std::string name;
    BinaryMask gt;
    BinaryMask seg;
};

SegmentationSummary summarize_segmentation(const std::vector<MaskPair>& pairs,
                                           const std::vector<double>& tolerances = default_hoover_tolerances());

}  // namespace spotid::evaluation
