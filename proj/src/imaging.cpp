#include "spotid/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spotid/errors.hpp"

namespace spotid::imaging {

template <typename T>
Raster<T>::Raster(int width, int height, T fill)
    : width_(width), height_(height) {
    if (width < 1 || height < 1) {
        throw InvalidInput("raster dimensions must be >= 1, got " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

template <typename T>
Raster<T>::Raster(int width, int height, std::vector<T> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 1 || height < 1) {
        throw InvalidInput("raster dimensions must be >= 1, got " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
    if (data_.size() != static_cast<std::size_t>(width) * height) {
        throw InvalidInput("raster data length does not match " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
}

template class Raster<double>;
template class Raster<std::uint8_t>;
template class Raster<Rgb>;

namespace {

bool in_unit_range(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

GrayImage::GrayImage(int width, int height, double fill) : Raster(width, height, fill) {
    if (!in_unit_range(fill)) throw InvalidInput("gray intensity outside [0,1]");
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : Raster(width, height, std::move(data)) {
    for (double v : this->data()) {
        if (!in_unit_range(v)) throw InvalidInput("gray intensity outside [0,1]");
    }
}

BinaryMask::BinaryMask(int width, int height, bool fill) : Raster(width, height, fill ? 1 : 0) {}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> data)
    : Raster(width, height, std::move(data)) {
    for (auto& v : this->data()) v = v ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data().begin(), data().end(), std::uint8_t{1}));
}

BinaryMask operator|(const BinaryMask& a, const BinaryMask& b) {
    if (!a.same_shape(b)) throw InvalidInput("mask OR requires equal dimensions");
    BinaryMask out(a.width(), a.height());
    auto da = a.data();
    auto db = b.data();
    auto dout = out.data();
    for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = (da[i] | db[i]) ? 1 : 0;
    return out;
}

BinaryMask operator!(const BinaryMask& a) {
    BinaryMask out(a.width(), a.height());
    auto da = a.data();
    auto dout = out.data();
    for (std::size_t i = 0; i < dout.size(); ++i) dout[i] = da[i] ? 0 : 1;
    return out;
}

RgbImage::RgbImage(int width, int height, Rgb fill) : Raster(width, height, fill) {
    if (!in_unit_range(fill.r) || !in_unit_range(fill.g) || !in_unit_range(fill.b)) {
        throw InvalidInput("rgb channel outside [0,1]");
    }
}

RgbImage::RgbImage(int width, int height, std::vector<Rgb> data)
    : Raster(width, height, std::move(data)) {
    for (const Rgb& p : this->data()) {
        if (!in_unit_range(p.r) || !in_unit_range(p.g) || !in_unit_range(p.b)) {
            throw InvalidInput("rgb channel outside [0,1]");
        }
    }
}

GrayImage to_grayscale(const RgbImage& img) {
    std::vector<double> out;
    out.reserve(img.size());
    for (const Rgb& p : img.data()) {
        // Rounding can push a white pixel a hair above 1.
        out.push_back(std::clamp(0.299 * p.r + 0.587 * p.g + 0.114 * p.b, 0.0, 1.0));
    }
    return GrayImage(img.width(), img.height(), std::move(out));
}

GrayImage median_filter(const GrayImage& img, int window) {
    if (window < 1 || window % 2 == 0) {
        throw InvalidParameter("median window must be odd and >= 1, got " + std::to_string(window));
    }
    if (window > std::min(img.width(), img.height())) {
        throw InvalidParameter("median window " + std::to_string(window) +
                               " exceeds image dimensions");
    }
    const int r = window / 2;
    const int w = img.width();
    const int h = img.height();
    std::vector<double> out(img.size());
    std::vector<double> hood(static_cast<std::size_t>(window) * window);
    const auto mid = hood.begin() + static_cast<std::ptrdiff_t>(hood.size() / 2);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t k = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -r; dx <= r; ++dx) {
                    hood[k++] = img.at(std::clamp(x + dx, 0, w - 1), yy);
                }
            }
            std::nth_element(hood.begin(), mid, hood.end());
            out[static_cast<std::size_t>(y) * w + x] = *mid;
        }
    }
    return GrayImage(w, h, std::move(out));
}

GrayImage gamma_correct(const GrayImage& img, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InvalidParameter("gamma must be a positive finite value");
    }
    std::vector<double> out;
    out.reserve(img.size());
    for (double v : img.data()) out.push_back(std::pow(v, gamma));
    return GrayImage(img.width(), img.height(), std::move(out));
}

BinaryMask resize_nearest(const BinaryMask& mask, int target_width, int target_height) {
    if (target_width < 1 || target_height < 1) {
        throw InvalidParameter("target dimensions must be >= 1");
    }
    if (target_width == mask.width() && target_height == mask.height()) return mask;

    BinaryMask out(target_width, target_height);
    const double sx = static_cast<double>(mask.width()) / target_width;
    const double sy = static_cast<double>(mask.height()) / target_height;
    for (int y = 0; y < target_height; ++y) {
        const int src_y = std::min(static_cast<int>((y + 0.5) * sy), mask.height() - 1);
        for (int x = 0; x < target_width; ++x) {
            const int src_x = std::min(static_cast<int>((x + 0.5) * sx), mask.width() - 1);
            out.at(x, y) = mask.at(src_x, src_y);
        }
    }
    return out;
}

}  // namespace spotid::imaging
