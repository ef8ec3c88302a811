#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace spotid::imaging {

// Dense row-major raster. Dimensions are always >= 1.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, T fill = T{});
    Raster(int width, int height, std::vector<T> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }

    bool same_shape(const Raster& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

// Intensities normalized to [0,1].
class GrayImage : public Raster<double> {
public:
    GrayImage() = default;
    GrayImage(int width, int height, double fill = 0.0);
    GrayImage(int width, int height, std::vector<double> data);
};

// Foreground = 1, background = 0.
class BinaryMask : public Raster<std::uint8_t> {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);
    BinaryMask(int width, int height, std::vector<std::uint8_t> data);

    bool test(int x, int y) const { return at(x, y) != 0; }
    void set(int x, int y, bool value = true) { at(x, y) = value ? 1 : 0; }
    std::size_t count() const noexcept;
};

BinaryMask operator|(const BinaryMask& a, const BinaryMask& b);
BinaryMask operator!(const BinaryMask& a);

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RgbImage : public Raster<Rgb> {
public:
    RgbImage() = default;
    RgbImage(int width, int height, Rgb fill = {});
    RgbImage(int width, int height, std::vector<Rgb> data);
};

// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayImage to_grayscale(const RgbImage& img);

// Median of the window x window neighborhood with edge replication.
// Throws InvalidParameter for an even window or one outside [1, min(w, h)].
GrayImage median_filter(const GrayImage& img, int window);

// out = in^gamma. Throws InvalidParameter for gamma <= 0.
GrayImage gamma_correct(const GrayImage& img, double gamma);

// Nearest-neighbour resample of a boolean raster.
BinaryMask resize_nearest(const BinaryMask& mask, int target_width, int target_height);

}  // namespace spotid::imaging
