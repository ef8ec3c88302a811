#include "spotid/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "spotid/errors.hpp"

namespace spotid::registration {

RigidTransform RigidTransform::from_angle(double radians, const Eigen::Vector2d& t) {
    RigidTransform out;
    const double c = std::cos(radians);
    const double s = std::sin(radians);
    out.rotation << c, -s, s, c;
    out.translation = t;
    return out;
}

SpotCloud RigidTransform::apply(const SpotCloud& cloud) const {
    SpotCloud out;
    out.points.reserve(cloud.size());
    for (const Point& p : cloud.points) out.points.push_back(apply(p));
    return out;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
}

double RigidTransform::angle() const { return std::atan2(rotation(1, 0), rotation(0, 0)); }

std::vector<Correspondence> nearest_correspondences(const SpotCloud& source, const SpotCloud& target) {
    if (source.empty() || target.empty()) {
        throw InvalidInput("nearest_correspondences requires non-empty clouds");
    }
    std::vector<Correspondence> out;
    out.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < target.size(); ++j) {
            const double d2 = (source[i] - target[j]).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = j;
            }
        }
        out.push_back({i, best, std::sqrt(best_d2)});
    }
    return out;
}

RigidTransform estimate_rigid(const std::vector<Point>& source, const std::vector<Point>& target) {
    if (source.size() != target.size()) {
        throw DegenerateGeometry("estimate_rigid requires equally sized point sequences");
    }
    if (source.size() < 2) throw DegenerateGeometry("estimate_rigid requires at least two pairs");

    const double n = static_cast<double>(source.size());
    Point mean_a = Point::Zero();
    Point mean_b = Point::Zero();
    for (std::size_t i = 0; i < source.size(); ++i) {
        mean_a += source[i];
        mean_b += target[i];
    }
    mean_a /= n;
    mean_b /= n;

    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double spread = 0.0;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Point da = source[i] - mean_a;
        cov += (target[i] - mean_b) * da.transpose();
        spread += da.squaredNorm();
    }
    if (!(spread > 1e-20 * (1.0 + mean_a.squaredNorm()))) {
        throw DegenerateGeometry("estimate_rigid: source points are coincident");
    }

    // cov = U S V^T; R = U diag(1, det(U V^T)) V^T maximizes tr(R^T cov).
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(1, 1) = -1.0;

    RigidTransform out;
    out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    out.translation = mean_b - out.rotation * mean_a;
    return out;
}

namespace {

double sum_squared(const std::vector<Correspondence>& corr) {
    double s = 0.0;
    for (const auto& c : corr) s += c.distance * c.distance;
    return s;
}

}  // namespace

IcpResult icp(const SpotCloud& source, const SpotCloud& target, const IcpOptions& options) {
    if (source.size() < 2 || target.size() < 2) {
        throw InvalidInput("icp requires at least two points in each cloud");
    }
    if (options.max_iterations < 1) throw InvalidParameter("icp max_iterations must be >= 1");
    if (!(options.tolerance >= 0.0)) throw InvalidParameter("icp tolerance must be >= 0");

    IcpResult result;
    result.correspondences = nearest_correspondences(source, target);
    result.objective = sum_squared(result.correspondences);
    result.objective_trace.push_back(result.objective);

    std::vector<Point> matched(source.size());
    for (int k = 1; k <= options.max_iterations; ++k) {
        for (const auto& c : result.correspondences) matched[c.source_index] = target[c.target_index];
        const RigidTransform candidate = estimate_rigid(source.points, matched);
        auto corr = nearest_correspondences(candidate.apply(source), target);
        const double obj = sum_squared(corr);
        result.iterations = k;

        // A step that does not lower the objective (only possible through
        // round-off at a fixed point) is rejected so the trace stays monotone.
        if (obj > result.objective) {
            result.objective_trace.push_back(result.objective);
            result.converged = true;
            break;
        }

        const double change = result.objective - obj;
        result.transform = candidate;
        result.correspondences = std::move(corr);
        result.objective = obj;
        result.objective_trace.push_back(obj);
        if (change < options.tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

std::vector<Assignment> one_to_one_assign(const SpotCloud& source, const SpotCloud& target) {
    if (source.empty() || target.empty()) {
        throw InvalidInput("one_to_one_assign requires non-empty clouds");
    }
    struct Edge {
        double d2;
        std::size_t s;
        std::size_t t;
    };
    std::vector<Edge> edges;
    edges.reserve(source.size() * target.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        for (std::size_t j = 0; j < target.size(); ++j) {
            edges.push_back({(source[i] - target[j]).squaredNorm(), i, j});
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.s != b.s) return a.s < b.s;
        return a.t < b.t;
    });

    const std::size_t want = std::min(source.size(), target.size());
    std::vector<bool> used_s(source.size(), false);
    std::vector<bool> used_t(target.size(), false);
    std::vector<Assignment> out;
    out.reserve(want);
    for (const Edge& e : edges) {
        if (used_s[e.s] || used_t[e.t]) continue;
        used_s[e.s] = true;
        used_t[e.t] = true;
        out.push_back({e.s, e.t});
        if (out.size() == want) break;
    }
    std::sort(out.begin(), out.end(),
              [](const Assignment& a, const Assignment& b) { return a.source_index < b.source_index; });
    return out;
}

ProcrustesResult procrustes(const std::vector<Point>& reference, const std::vector<Point>& moving) {
    if (reference.size() != moving.size()) {
        throw InvalidInput("procrustes requires equally sized configurations");
    }
    if (reference.size() < 2) throw InvalidInput("procrustes requires at least two landmarks");

    const double n = static_cast<double>(reference.size());
    Point mean_x = Point::Zero();
    Point mean_y = Point::Zero();
    for (std::size_t i = 0; i < reference.size(); ++i) {
        mean_x += reference[i];
        mean_y += moving[i];
    }
    mean_x /= n;
    mean_y /= n;

    double norm_x = 0.0;
    double norm_y = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        norm_x += (reference[i] - mean_x).squaredNorm();
        norm_y += (moving[i] - mean_y).squaredNorm();
    }
    norm_x = std::sqrt(norm_x);
    norm_y = std::sqrt(norm_y);
    const double floor_x = 1e-10 * (1.0 + mean_x.norm());
    const double floor_y = 1e-10 * (1.0 + mean_y.norm());
    if (!(norm_x > floor_x) || !(norm_y > floor_y)) {
        throw InvalidInput("procrustes: configuration is fully coincident");
    }

    // Cross-product of the unit-norm centred configurations.
    Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < reference.size(); ++i) {
        m += ((reference[i] - mean_x) / norm_x) * ((moving[i] - mean_y) / norm_y).transpose();
    }
    const Eigen::JacobiSVD<Eigen::Matrix2d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d d = Eigen::Matrix2d::Identity();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(1, 1) = -1.0;
    const auto& sv = svd.singularValues();
    const double fit = sv(0) + d(1, 1) * sv(1);

    ProcrustesResult out;
    out.dissimilarity = std::clamp(1.0 - fit * fit, 0.0, 1.0);
    out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    out.scale = fit * norm_x / norm_y;
    out.translation = mean_x - out.scale * out.rotation * mean_y;
    return out;
}

std::string cloud_to_csv(const SpotCloud& cloud) {
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    os << "x,y\n";
    for (const Point& p : cloud.points) os << p.x() << ',' << p.y() << '\n';
    return os.str();
}

SpotCloud cloud_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("cloud CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y") throw InvalidInput("cloud CSV header must be 'x,y'");

    SpotCloud cloud;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw InvalidInput("cloud CSV line " + std::to_string(lineno) + ": expected x,y");
        }
        try {
            std::size_t ux = 0;
            std::size_t uy = 0;
            const std::string xs = line.substr(0, comma);
            const std::string ys = line.substr(comma + 1);
            const double x = std::stod(xs, &ux);
            const double y = std::stod(ys, &uy);
            if (ux != xs.size() || uy != ys.size() || !std::isfinite(x) || !std::isfinite(y)) {
                throw std::invalid_argument("bad number");
            }
            cloud.points.emplace_back(x, y);
        } catch (const std::exception&) {
            throw InvalidInput("cloud CSV line " + std::to_string(lineno) + ": malformed coordinates");
        }
    }
    return cloud;
}

void write_cloud_csv(const SpotCloud& cloud, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << cloud_to_csv(cloud);
}

SpotCloud read_cloud_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return cloud_from_csv(os.str());
}

}  // namespace spotid::registration
