#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ssme/cube.hpp"

namespace ssme {

/// 4-connected neighborhood of one pixel in fixed (up, left, down, right)
/// order, truncated at image borders.
struct SpatialNeighborhood {
    std::int32_t center = -1;
    std::array<std::int32_t, 4> ids{};
    int count = 0;

    std::span<const std::int32_t> neighbors() const { return {ids.data(), static_cast<std::size_t>(count)}; }
};

SpatialNeighborhood spatial_neighbors(std::int64_t index, int height, int width);

/// Exact k-nearest-neighbor lists over all pixels, sorted by Euclidean
/// distance ascending (ties by smaller linear index), self excluded.
struct SpectralNeighborhood {
    int k = 0;
    int pixel_count = 0;
    std::vector<std::int32_t> ids;  // pixel_count * k
    std::vector<double> dists;      // pixel_count * k, non-negative, sorted per pixel

    std::span<const std::int32_t> neighbors(int pixel) const {
        return {ids.data() + static_cast<std::size_t>(pixel) * k, static_cast<std::size_t>(k)};
    }
    std::span<const double> distances(int pixel) const {
        return {dists.data() + static_cast<std::size_t>(pixel) * k, static_cast<std::size_t>(k)};
    }
};

/// Exact search: every unordered pair is evaluated exactly once, so stored
/// distances are symmetric to the last ulp and results do not depend on the
/// thread count or block size.
SpectralNeighborhood spectral_knn(const SpectralMatrix& X, int k, int threads = 0, int block = 256);

/// Debug dump, one line per pixel: `index: (nbr,dist) (nbr,dist) ...`
void dump_graph(const SpectralNeighborhood& g, const std::string& path);

}  // namespace ssme
