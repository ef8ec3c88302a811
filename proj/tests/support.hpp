#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "spotid/imaging.hpp"
#include "spotid/registration.hpp"

namespace testing {

using spotid::imaging::BinaryMask;
using spotid::registration::Point;
using spotid::registration::SpotCloud;

inline BinaryMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution on(density);
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, on(rng));
    return m;
}

// Filled axis-aligned rectangle [x0, x1) x [y0, y1).
inline void fill_rect(BinaryMask& m, int x0, int y0, int x1, int y1) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.set(x, y);
}

inline SpotCloud random_cloud(std::size_t n, double extent, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, extent);
    SpotCloud c;
    for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng));
    return c;
}

// Union-find 8-connected labeling, kept apart from the library's scan.
struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Returns a per-pixel region id (-1 background) and the number of regions.
inline std::pair<std::vector<int>, int> oracle_regions(const BinaryMask& m) {
    const int w = m.width(), h = m.height();
    UnionFind uf(w * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.test(x, y)) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h || !m.test(nx, ny)) continue;
                    uf.unite(y * w + x, ny * w + nx);
                }
        }
    std::vector<int> id(static_cast<std::size_t>(w * h), -1);
    std::vector<int> root_id(static_cast<std::size_t>(w * h), -1);
    int n = 0;
    for (int i = 0; i < w * h; ++i) {
        if (!m.data()[i]) continue;
        const int r = uf.find(i);
        if (root_id[r] < 0) root_id[r] = n++;
        id[i] = root_id[r];
    }
    return {id, n};
}

}  // namespace testing
