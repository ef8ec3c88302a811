#include "spotid/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <sstream>

#include "spotid/components.hpp"
#include "spotid/errors.hpp"

namespace spotid::segmentation {

void SegmentationParams::validate() const {
    if (median_window < 1 || median_window % 2 == 0) {
        throw InvalidParameter("median_window must be odd and >= 1");
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidParameter("gamma must be > 0");
    if (!(cv_mu >= 0.0)) throw InvalidParameter("cv_mu must be >= 0");
    if (!(cv_lambda1 > 0.0)) throw InvalidParameter("cv_lambda1 must be > 0");
    if (!(cv_lambda2 > 0.0)) throw InvalidParameter("cv_lambda2 must be > 0");
    if (cv_iterations < 1) throw InvalidParameter("cv_iterations must be >= 1");
    if (!(cv_tol >= 0.0)) throw InvalidParameter("cv_tol must be >= 0");
    if (area_min < 0) throw InvalidParameter("area_min must be >= 0");
    if (area_min >= area_max) throw InvalidParameter("area_min must be < area_max");
}

namespace {

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        throw InvalidParameter("'" + key + "' is not a number: " + value);
    }
    if (used != value.size()) throw InvalidParameter("'" + key + "' is not a number: " + value);
    return v;
}

long parse_long(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(value, &used);
    } catch (const std::exception&) {
        throw InvalidParameter("'" + key + "' is not an integer: " + value);
    }
    if (used != value.size()) throw InvalidParameter("'" + key + "' is not an integer: " + value);
    return v;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

SegmentationParams params_from_map(const std::map<std::string, std::string>& kv,
                                   SegmentationParams p) {
    for (const auto& [key, value] : kv) {
        if (key == "median_window") p.median_window = static_cast<int>(parse_long(key, value));
        else if (key == "gamma") p.gamma = parse_double(key, value);
        else if (key == "cv_mu") p.cv_mu = parse_double(key, value);
        else if (key == "cv_lambda1") p.cv_lambda1 = parse_double(key, value);
        else if (key == "cv_lambda2") p.cv_lambda2 = parse_double(key, value);
        else if (key == "cv_iterations") p.cv_iterations = static_cast<int>(parse_long(key, value));
        else if (key == "cv_tol") p.cv_tol = parse_double(key, value);
        else if (key == "area_min") p.area_min = parse_long(key, value);
        else if (key == "area_max") p.area_max = parse_long(key, value);
        else throw InvalidParameter("unknown segmentation parameter '" + key + "'");
    }
    p.validate();
    return p;
}

std::map<std::string, std::string> params_to_map(const SegmentationParams& p) {
    return {
        {"median_window", std::to_string(p.median_window)},
        {"gamma", format_double(p.gamma)},
        {"cv_mu", format_double(p.cv_mu)},
        {"cv_lambda1", format_double(p.cv_lambda1)},
        {"cv_lambda2", format_double(p.cv_lambda2)},
        {"cv_iterations", std::to_string(p.cv_iterations)},
        {"cv_tol", format_double(p.cv_tol)},
        {"area_min", std::to_string(p.area_min)},
        {"area_max", std::to_string(p.area_max)},
    };
}

SegmentationParams parse_params(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw InvalidParameter(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return params_from_map(kv);
}

SegmentationParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidParameter("cannot read params file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_params(text.str(), path);
}

namespace {

// Fixed smoothing width of the regularized delta, gradient-magnitude floor
// of the curvature coefficients, and time step. A floor of 1 keeps flat
// stretches of the level set responsive to the fit force; with a tiny floor
// those coefficients blow up and pin the interior of every region.
constexpr double kEpsilon = 1.0;
constexpr double kEta = 1.0;
constexpr double kTimeStep = 2.0;
// The checkerboard start has both phases averaging the whole image, so the
// partition barely moves for a while. The tolerance test only counts once
// the energy has dropped this far below its starting value, and it must
// hold for kPatience consecutive iterations.
constexpr double kLeaveStart = 0.99;
constexpr int kPatience = 5;

struct RegionMeans {
    double inside = 0.0;
    double outside = 0.0;
    std::size_t n_inside = 0;
    std::size_t n_outside = 0;
};

RegionMeans region_means(std::span<const double> f, const std::vector<double>& phi) {
    RegionMeans m;
    double s_in = 0.0;
    double s_out = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (phi[i] >= 0.0) {
            s_in += f[i];
            ++m.n_inside;
        } else {
            s_out += f[i];
            ++m.n_outside;
        }
    }
    if (m.n_inside) m.inside = s_in / static_cast<double>(m.n_inside);
    if (m.n_outside) m.outside = s_out / static_cast<double>(m.n_outside);
    return m;
}

double dirac(double phi) { return kEpsilon / (std::numbers::pi * (kEpsilon * kEpsilon + phi * phi)); }

// Piecewise-constant Chan-Vese energy of the current partition:
// mu * (4-neighbour boundary length) + fit terms. Unlike the smoothed
// functional it is exactly flat once the partition stops changing.
double energy(std::span<const double> f, const std::vector<double>& phi, int w, int h,
              const RegionMeans& c, const SegmentationParams& p) {
    double length = 0.0;
    double fit = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const bool in = phi[i] >= 0.0;
            if (x + 1 < w && in != (phi[i + 1] >= 0.0)) length += 1.0;
            if (y + 1 < h && in != (phi[i + static_cast<std::size_t>(w)] >= 0.0)) length += 1.0;
            const double d = f[i] - (in ? c.inside : c.outside);
            fit += (in ? p.cv_lambda1 : p.cv_lambda2) * d * d;
        }
    }
    return p.cv_mu * length + fit;
}

}  // namespace

BinaryMask active_contours(const GrayImage& img, const SegmentationParams& params,
                           ActiveContourTrace* trace) {
    params.validate();
    const int w = img.width();
    const int h = img.height();
    const auto f = img.data();

    // Checkerboard initialization with a 16 px period; the half-pixel offset
    // keeps the level set off exact zeros.
    std::vector<double> phi(img.size());
    constexpr double k = std::numbers::pi / 8.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            phi[static_cast<std::size_t>(y) * w + x] = std::sin(k * (x + 0.5)) * std::sin(k * (y + 0.5));
        }
    }

    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

    RegionMeans c = region_means(f, phi);
    const double e_init = energy(f, phi, w, h, c, params);
    double e_prev = e_init;
    ActiveContourTrace local;
    int stable = 0;

    for (int it = 1; it <= params.cv_iterations; ++it) {
        // Semi-implicit Gauss-Seidel sweep of the gradient-descent equation.
        for (int y = 0; y < h; ++y) {
            const int ym = std::max(y - 1, 0);
            const int yp = std::min(y + 1, h - 1);
            for (int x = 0; x < w; ++x) {
                const int xm = std::max(x - 1, 0);
                const int xp = std::min(x + 1, w - 1);
                const std::size_t i = idx(x, y);
                const double p0 = phi[i];

                const double dxp = phi[idx(xp, y)] - p0;
                const double dxm = p0 - phi[idx(xm, y)];
                const double dx0 = 0.5 * (phi[idx(xp, y)] - phi[idx(xm, y)]);
                const double dyp = phi[idx(x, yp)] - p0;
                const double dym = p0 - phi[idx(x, ym)];
                const double dy0 = 0.5 * (phi[idx(x, yp)] - phi[idx(x, ym)]);
                const double dy0_xm = 0.5 * (phi[idx(xm, yp)] - phi[idx(xm, ym)]);
                const double dx0_ym = 0.5 * (phi[idx(xp, ym)] - phi[idx(xm, ym)]);

                const double c1 = 1.0 / std::sqrt(kEta + dxp * dxp + dy0 * dy0);
                const double c2 = 1.0 / std::sqrt(kEta + dxm * dxm + dy0_xm * dy0_xm);
                const double c3 = 1.0 / std::sqrt(kEta + dx0 * dx0 + dyp * dyp);
                const double c4 = 1.0 / std::sqrt(kEta + dx0_ym * dx0_ym + dym * dym);

                const double delta = kTimeStep * dirac(p0);
                const double d_in = f[i] - c.inside;
                const double d_out = f[i] - c.outside;
                const double numer =
                    p0 + delta * (params.cv_mu * (phi[idx(xp, y)] * c1 + phi[idx(xm, y)] * c2 +
                                                  phi[idx(x, yp)] * c3 + phi[idx(x, ym)] * c4) -
                                  params.cv_lambda1 * d_in * d_in + params.cv_lambda2 * d_out * d_out);
                const double denom = 1.0 + delta * params.cv_mu * (c1 + c2 + c3 + c4);
                phi[i] = numer / denom;
            }
        }

        c = region_means(f, phi);
        const double e = energy(f, phi, w, h, c, params);
        local.iterations = it;
        local.energy = e;
        const bool left_init = e <= kLeaveStart * e_init;
        stable = left_init && std::abs(e - e_prev) < params.cv_tol ? stable + 1 : 0;
        if (stable >= kPatience) {
            local.converged = true;
            break;
        }
        e_prev = e;
    }
    if (trace) *trace = local;

    // The strictly brighter phase is foreground; a one-phase or tied
    // result has no spot structure and yields an empty mask.
    BinaryMask mask(w, h);
    if (c.n_inside == 0 || c.n_outside == 0 || c.inside == c.outside) return mask;
    const bool inside_is_fg = c.inside > c.outside;
    auto out = mask.data();
    for (std::size_t i = 0; i < phi.size(); ++i) {
        out[i] = ((phi[i] >= 0.0) == inside_is_fg) ? 1 : 0;
    }
    return mask;
}

BinaryMask area_open(const BinaryMask& mask, long area_min, long area_max) {
    if (area_min >= area_max) throw InvalidParameter("area_min must be < area_max");
    const auto comps = imaging::label_components(mask);
    BinaryMask out(mask.width(), mask.height());
    auto dst = out.data();
    for (std::size_t i = 0; i < comps.labels.size(); ++i) {
        const auto label = comps.labels[i];
        if (label == 0) continue;
        const auto area = comps.areas[static_cast<std::size_t>(label - 1)];
        if (area >= area_min && area <= area_max) dst[i] = 1;
    }
    return out;
}

namespace {

BinaryMask run_thread(const GrayImage& filtered, const SegmentationParams& p, bool with_gamma) {
    const GrayImage input = with_gamma ? imaging::gamma_correct(filtered, p.gamma) : filtered;
    return area_open(active_contours(input, p), p.area_min, p.area_max);
}

}  // namespace

SegmentationResult segment_scale(const RgbImage& img, const SegmentationParams& params,
                                 bool concurrent) {
    params.validate();
    // Gray conversion and median filtering are shared by both threads.
    const GrayImage filtered = imaging::median_filter(imaging::to_grayscale(img), params.median_window);

    SegmentationResult result;
    result.params_used = params;
    if (concurrent) {
        auto bright = std::async(std::launch::async, run_thread, std::cref(filtered), std::cref(params), true);
        result.dark_thread_mask = run_thread(filtered, params, false);
        result.bright_thread_mask = bright.get();
    } else {
        result.dark_thread_mask = run_thread(filtered, params, false);
        result.bright_thread_mask = run_thread(filtered, params, true);
    }
    result.mask = result.dark_thread_mask | result.bright_thread_mask;
    return result;
}

}  // namespace spotid::segmentation
