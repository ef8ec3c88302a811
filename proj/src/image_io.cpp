#include "spotid/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "spotid/errors.hpp"

namespace spotid::imaging {

namespace {

cv::Mat decode(std::span<const std::uint8_t> bytes, int flags) {
    if (bytes.empty()) throw DecodeError("empty image payload");
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1,
                      const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat img;
    try {
        img = cv::imdecode(buf, flags);
    } catch (const cv::Exception& e) {
        throw DecodeError(std::string("image decode failed: ") + e.what());
    }
    if (img.empty()) throw DecodeError("unrecognized or corrupt image payload");
    return img;
}

Bytes encode_png(const cv::Mat& img) {
    std::vector<uchar> out;
    const std::vector<int> params{cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", img, out, params)) throw Error("PNG encoding failed");
    return Bytes(out.begin(), out.end());
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

RgbImage decode_rgb(std::span<const std::uint8_t> bytes) {
    const cv::Mat img = decode(bytes, cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
    double scale = 1.0 / 255.0;
    if (img.depth() == CV_16U) {
        scale = 1.0 / 65535.0;
    } else if (img.depth() != CV_8U) {
        throw DecodeError("unsupported image bit depth");
    }
    std::vector<Rgb> px(static_cast<std::size_t>(img.rows) * img.cols);
    for (int y = 0; y < img.rows; ++y) {
        for (int x = 0; x < img.cols; ++x) {
            Rgb& p = px[static_cast<std::size_t>(y) * img.cols + x];
            if (img.depth() == CV_8U) {
                const auto& v = img.at<cv::Vec3b>(y, x);
                p = {v[2] * scale, v[1] * scale, v[0] * scale};
            } else {
                const auto& v = img.at<cv::Vec3w>(y, x);
                p = {v[2] * scale, v[1] * scale, v[0] * scale};
            }
        }
    }
    return RgbImage(img.cols, img.rows, std::move(px));
}

RgbImage read_rgb(const std::filesystem::path& path) { return decode_rgb(read_file(path)); }

BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
    const cv::Mat img = decode(bytes, cv::IMREAD_GRAYSCALE);
    std::vector<std::uint8_t> data(static_cast<std::size_t>(img.rows) * img.cols);
    for (int y = 0; y < img.rows; ++y) {
        const auto* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) {
            data[static_cast<std::size_t>(y) * img.cols + x] = row[x] >= 128 ? 1 : 0;
        }
    }
    return BinaryMask(img.cols, img.rows, std::move(data));
}

BinaryMask read_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

Bytes encode_mask_png(const BinaryMask& mask) {
    cv::Mat img(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width(); ++x) row[x] = mask.test(x, y) ? 255 : 0;
    }
    return encode_png(img);
}

void write_mask_png(const BinaryMask& mask, const std::filesystem::path& path) {
    write_file(path, encode_mask_png(mask));
}

Bytes encode_gray_png(const GrayImage& img) {
    cv::Mat out(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = out.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width(); ++x) row[x] = to_byte(img.at(x, y));
    }
    return encode_png(out);
}

Bytes encode_rgb_png(const RgbImage& img) {
    cv::Mat out(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = out.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width(); ++x) {
            const Rgb& p = img.at(x, y);
            row[x] = cv::Vec3b(to_byte(p.b), to_byte(p.g), to_byte(p.r));
        }
    }
    return encode_png(out);
}

void write_rgb_png(const RgbImage& img, const std::filesystem::path& path) {
    write_file(path, encode_rgb_png(img));
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path.string());
}

}  // namespace spotid::imaging
