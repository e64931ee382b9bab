#pragma once

#include <cstddef>
#include <vector>

#include "d2c/encoders/image_source.hpp"
#include "d2c/numcore/autodiff.hpp"

namespace d2c::mfe {

// Block t (row-major, from 0) of the 2^(s-1) × 2^(s-1) partition at scale s (from 1).
struct BlockCoord {
    std::size_t scale = 1;
    std::size_t index = 0;

    bool operator==(const BlockCoord&) const = default;
};

// Patch-space extent of a block: rows [row, row + size), cols [col, col + size).
struct BlockRegion {
    std::size_t row = 0;
    std::size_t col = 0;
    std::size_t size = 0;
};

// M×D pooled block features, rows ordered by scale then row-major block.
struct MultiScaleFeatures {
    Var matrix;
    std::vector<BlockCoord> index;

    std::size_t rows() const { return index.size(); }
};

// M = Σ_{s=1..S} 4^(s-1).
std::size_t block_count(std::size_t scales);
// Grid side must be a multiple of this (2^(S-1)).
std::size_t required_divisor(std::size_t scales);
std::size_t blocks_per_side(std::size_t scale);
BlockRegion block_region(std::size_t side, const BlockCoord& coord);
std::vector<BlockCoord> pyramid_index(std::size_t scales);

// Channel-wise global max plus global mean of an h×w×D block.
Tensor pool_block(const Tensor& block);

// Differentiable pyramid pooling of an N×N×D map into M×D. The max term
// routes its gradient to the first maximal entry in row-major order.
Var multiscale_pool(const Var& map, std::size_t scales);

MultiScaleFeatures extract_multiscale(const enc::FeatureMap& map, std::size_t scales);

} // namespace d2c::mfe
