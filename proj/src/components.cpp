#include "spotid/components.hpp"

namespace spotid::imaging {

ComponentLabels label_components(const BinaryMask& mask) {
    ComponentLabels out;
    out.width = mask.width();
    out.height = mask.height();
    out.labels.assign(mask.size(), 0);

    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::pair<int, int>> stack;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t seed = static_cast<std::size_t>(y) * w + x;
            if (!mask.test(x, y) || out.labels[seed] != 0) continue;

            const auto label = static_cast<std::int32_t>(out.areas.size() + 1);
            std::int64_t area = 0;
            out.labels[seed] = label;
            stack.assign(1, {x, y});
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                ++area;
                for (int dy = -1; dy <= 1; ++dy) {
                    const int ny = cy + dy;
                    if (ny < 0 || ny >= h) continue;
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        if (nx < 0 || nx >= w || (dx == 0 && dy == 0)) continue;
                        const std::size_t idx = static_cast<std::size_t>(ny) * w + nx;
                        if (mask.data()[idx] && out.labels[idx] == 0) {
                            out.labels[idx] = label;
                            stack.emplace_back(nx, ny);
                        }
                    }
                }
            }
            out.areas.push_back(area);
        }
    }
    return out;
}

}  // namespace spotid::imaging
