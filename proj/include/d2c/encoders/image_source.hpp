#pragma once

#include <cstdint>
#include <filesystem>

#include "d2c/numcore/tensor.hpp"

namespace d2c::enc {

// N×N×D grid of patch features, indexed [row][col][channel].
class FeatureMap {
public:
    explicit FeatureMap(Tensor grid);

    std::size_t side() const { return grid_.dim(0); }
    std::size_t width() const { return grid_.dim(2); }
    const Tensor& grid() const noexcept { return grid_; }
    Tensor& grid() noexcept { return grid_; }
    double at(std::size_t row, std::size_t col, std::size_t ch) const {
        return grid_[(row * side() + col) * width() + ch];
    }
    // (N²)×D view, row-major over patches.
    Tensor flattened() const;

private:
    Tensor grid_;
};

struct SyntheticImageSpec {
    std::size_t side = 8;
    std::size_t width = 16;
    std::uint64_t seed = 0;
};

// Loads a rank-3 square grid from a tensor file.
FeatureMap provide_image(const std::filesystem::path& path);
// Standard-normal patch features, deterministic in the seed.
FeatureMap provide_image(const SyntheticImageSpec& spec);

} // namespace d2c::enc
