#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spotid/gallery.hpp"
#include "spotid/imaging.hpp"
#include "spotid/registration.hpp"

namespace spotid::synthetic {

using gallery::Gallery;
using gallery::ScaleKey;
using imaging::BinaryMask;
using imaging::RgbImage;
using registration::SpotCloud;

struct TransformBounds {
    double max_rotation_deg = 8.0;
    double max_translation_px = 8.0;
};

struct CorpusParams {
    int individuals = 30;
    int samples_per = 3;
    double jitter_sigma = 1.0;
    TransformBounds bounds;
    int width = 256;
    int height = 256;
    int min_spots = 10;
    int max_spots = 40;
    double spot_radius = 3.0;
    double min_spacing = 14.0;
    // Spots are laid out at least this far from the border.
    double margin = 32.0;
    std::uint64_t seed = 1;
};

struct Corpus {
    Gallery gallery;
    // Ground-truth identity of every sample.
    std::map<ScaleKey, std::string> identity;
    // Base layout of each individual before jitter and transform.
    std::map<std::string, SpotCloud> layouts;
};

// Individuals are "L001", "L002", ...; samples "s1", "s2", ... Light
// conditions cycle normal, ideal, hard_exposed per sample. Deterministic in
// `seed`. Throws InvalidParameter when the layout cannot be realized.
Corpus generate_synthetic_corpus(const CorpusParams& params);

// Dart-throwing Poisson-disc layout of `count` points with pairwise
// distance >= min_spacing inside [margin, width - margin] x [margin, height - margin].
SpotCloud poisson_disc_layout(int count, int width, int height, double min_spacing, double margin,
                              std::uint64_t seed);

// Filled disks of the given radius; centres outside the raster are dropped.
BinaryMask rasterize_spots(const SpotCloud& centres, double radius, int width, int height);

enum class Lighting {
    Uniform,        // dark scale, evenly lit
    HalfExposed,    // left half dark, right half overexposed
};

struct ScalePhoto {
    RgbImage image;
    BinaryMask ground_truth;
};

// Bright spots on a dark scale, with optional overexposure. Ground truth is
// the rasterized spot disks.
ScalePhoto render_scale_photo(const SpotCloud& centres, double radius, int width, int height,
                              Lighting lighting, std::uint64_t seed);

}  // namespace spotid::synthetic
