#pragma once

#include <cstdint>
#include <vector>

#include "spotid/imaging.hpp"

namespace spotid::imaging {

// 8-connected labeling of the foreground.
//
// Labels are 1..count, assigned in row-major order of each component's
// topmost-leftmost pixel (the first pixel a raster scan meets). Label 0
// is background.
struct ComponentLabels {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;
    // areas[k] is the pixel count of label k + 1.
    std::vector<std::int64_t> areas;

    int count() const noexcept { return static_cast<int>(areas.size()); }
    std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

ComponentLabels label_components(const BinaryMask& mask);

}  // namespace spotid::imaging
