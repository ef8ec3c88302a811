#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spotid::registration {

using Point = Eigen::Vector2d;

// Spot centroids in pixel coordinates (x = column, y = row).
struct SpotCloud {
    std::vector<Point> points;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    const Point& operator[](std::size_t i) const { return points[i]; }

    friend bool operator==(const SpotCloud&, const SpotCloud&) = default;
};

struct RigidTransform {
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();

    static RigidTransform from_angle(double radians, const Eigen::Vector2d& t = Eigen::Vector2d::Zero());

    Point apply(const Point& p) const { return rotation * p + translation; }
    SpotCloud apply(const SpotCloud& cloud) const;
    // this ∘ other: apply `other` first.
    RigidTransform compose(const RigidTransform& other) const;
    double angle() const;
};

struct Correspondence {
    std::size_t source_index = 0;
    std::size_t target_index = 0;
    double distance = 0.0;
};

// One entry per source point: the nearest target point (ties go to the
// lowest target index). Throws InvalidInput on an empty cloud.
std::vector<Correspondence> nearest_correspondences(const SpotCloud& source, const SpotCloud& target);

// Least-squares rotation + translation taking source[i] onto target[i],
// via the SVD of the cross-covariance with the reflection case corrected.
// Throws DegenerateGeometry for fewer than two pairs or a coincident source.
RigidTransform estimate_rigid(const std::vector<Point>& source, const std::vector<Point>& target);

struct IcpOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;
};

struct IcpResult {
    RigidTransform transform;
    // Sum of squared nearest-neighbour distances after the final transform.
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
    // objective_trace[0] is the untransformed objective; one entry per iteration after.
    std::vector<double> objective_trace;
    std::vector<Correspondence> correspondences;
};

// Point-to-point ICP. Throws InvalidInput when either cloud has fewer than two points.
IcpResult icp(const SpotCloud& source, const SpotCloud& target, const IcpOptions& options = {});

struct Assignment {
    std::size_t source_index = 0;
    std::size_t target_index = 0;
    friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Greedy shortest-edge-first one-to-one pairing over all source/target
// pairs. Size is min(|source|, |target|); each index appears at most once.
std::vector<Assignment> one_to_one_assign(const SpotCloud& source, const SpotCloud& target);

struct ProcrustesResult {
    // Residual after superimposing the unit-norm centred configurations, in [0,1].
    double dissimilarity = 0.0;
    // reference[i] ≈ scale * rotation * moving[i] + translation
    double scale = 1.0;
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Vector2d translation = Eigen::Vector2d::Zero();
};

// Ordinary Procrustes analysis of matched landmarks, reflections excluded.
// Throws InvalidInput for a count mismatch, fewer than two landmarks, or a
// fully coincident configuration.
ProcrustesResult procrustes(const std::vector<Point>& reference, const std::vector<Point>& moving);

// CSV with header `x,y`.
std::string cloud_to_csv(const SpotCloud& cloud);
SpotCloud cloud_from_csv(const std::string& text);
void write_cloud_csv(const SpotCloud& cloud, const std::filesystem::path& path);
SpotCloud read_cloud_csv(const std::filesystem::path& path);

}  // namespace spotid::registration
