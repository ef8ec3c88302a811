#pragma once

#include <map>
#include <string>

#include "spotid/imaging.hpp"

namespace spotid::segmentation {

using imaging::BinaryMask;
using imaging::GrayImage;
using imaging::RgbImage;

struct SegmentationParams {
    int median_window = 5;
    double gamma = 2.2;
    double cv_mu = 0.2;          // contour length weight
    double cv_lambda1 = 1.0;     // inside fit weight
    double cv_lambda2 = 1.0;     // outside fit weight
    int cv_iterations = 300;
    double cv_tol = 1e-4;        // stop once the energy change stays below this
    long area_min = 15;
    long area_max = 2500;

    // Throws InvalidParameter naming the offending field.
    void validate() const;

    friend bool operator==(const SegmentationParams&, const SegmentationParams&) = default;
};

// Flat key/value form used by config files and HTTP requests. Unknown keys
// are rejected; absent keys keep their defaults.
SegmentationParams params_from_map(const std::map<std::string, std::string>& kv,
                                   SegmentationParams base = {});
std::map<std::string, std::string> params_to_map(const SegmentationParams& p);

// `key = value` lines; '#' starts a comment. `origin` prefixes error
// messages.
SegmentationParams parse_params(const std::string& text, const std::string& origin = "params");
SegmentationParams load_params(const std::string& path);

struct ActiveContourTrace {
    int iterations = 0;
    bool converged = false;
    double energy = 0.0;
};

// Two-phase Chan-Vese level set. The brighter phase is returned as
// foreground. Always stops within params.cv_iterations.
BinaryMask active_contours(const GrayImage& img, const SegmentationParams& params,
                           ActiveContourTrace* trace = nullptr);

// Removes every 8-connected component whose area is outside [area_min, area_max].
BinaryMask area_open(const BinaryMask& mask, long area_min, long area_max);

struct SegmentationResult {
    BinaryMask mask;
    BinaryMask dark_thread_mask;
    BinaryMask bright_thread_mask;
    SegmentationParams params_used;
};

// Dark thread: gray, median, active contours, area opening.
// Bright thread: gray, median, gamma, active contours, area opening.
// The merged mask is their pixel-wise OR. With `concurrent` the two threads
// run on separate std::threads; the output is identical either way.
SegmentationResult segment_scale(const RgbImage& img, const SegmentationParams& params,
                                 bool concurrent = true);

}  // namespace spotid::segmentation
