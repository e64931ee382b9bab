#pragma once

#include <filesystem>
#include <vector>

#include "d2c/mfe/multiscale.hpp"
#include "d2c/numcore/tensor.hpp"

namespace d2c::cli {

// Collapses one heads × L × M cross-attention tensor onto the g × g grid of
// finest blocks (g = 2^(S-1)): mean over heads and queries, then every cell
// sums the weights of all multi-scale keys whose region contains it.
Tensor aggregate_attention(const Tensor& weights, const std::vector<mfe::BlockCoord>& index, std::size_t scales);

// Element-wise mean of equally shaped grids.
Tensor mean_grid(const std::vector<Tensor>& grids);

// Grid divided by its total, so the cells sum to 1.
Tensor attention_share(const Tensor& grid);

// Row-major index of the largest cell (first on ties).
std::size_t argmax_cell(const Tensor& grid);

// One line per grid row, comma separated, full precision.
void write_grid_csv(const std::filesystem::path& path, const Tensor& grid);
// Binary 8-bit PGM; values min-max scaled to 0..255, a constant grid is all 0.
void write_grid_pgm(const std::filesystem::path& path, const Tensor& grid);

} // namespace d2c::cli
