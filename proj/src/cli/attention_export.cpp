#include "d2c/cli/attention_export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "d2c/numcore/errors.hpp"

namespace d2c::cli {

Tensor aggregate_attention(const Tensor& weights, const std::vector<mfe::BlockCoord>& index, std::size_t scales) {
    if (weights.rank() != 3 || weights.dim(2) != index.size()) {
        throw ShapeError("attention weights " + shape_string(weights.shape()) + " do not match " +
                         std::to_string(index.size()) + " multi-scale keys");
    }
    const std::size_t heads = weights.dim(0), queries = weights.dim(1), keys = weights.dim(2);
    const std::size_t g = mfe::blocks_per_side(scales);
    std::vector<double> per_key(keys, 0.0);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t q = 0; q < queries; ++q)
            for (std::size_t k = 0; k < keys; ++k) per_key[k] += weights[(h * queries + q) * keys + k];
    const double n = static_cast<double>(heads * queries);
    Tensor grid({g, g});
    for (std::size_t k = 0; k < keys; ++k) {
        const auto& c = index[k];
        if (c.scale < 1 || c.scale > scales) throw ShapeError("key scale outside the pyramid");
        const std::size_t per = mfe::blocks_per_side(c.scale);
        const std::size_t span = g / per;
        const std::size_t r0 = (c.index / per) * span, c0 = (c.index % per) * span;
        for (std::size_t r = r0; r < r0 + span; ++r)
            for (std::size_t col = c0; col < c0 + span; ++col) grid.at(r, col) += per_key[k] / n;
    }
    return grid;
}

Tensor mean_grid(const std::vector<Tensor>& grids) {
    if (grids.empty()) throw DegenerateInputError("no grids to average");
    Tensor out(grids[0].shape());
    for (const auto& g : grids) {
        if (g.shape() != out.shape()) throw ShapeError("grids differ in shape");
        for (std::size_t i = 0; i < g.size(); ++i) out[i] += g[i];
    }
    for (auto& v : out.data()) v /= static_cast<double>(grids.size());
    return out;
}

Tensor attention_share(const Tensor& grid) {
    double total = 0.0;
    for (double v : grid.data()) total += v;
    if (!(total > 0.0)) throw DegenerateInputError("attention grid has no mass");
    Tensor out = grid;
    for (auto& v : out.data()) v /= total;
    return out;
}

std::size_t argmax_cell(const Tensor& grid) {
    if (grid.size() == 0) throw DegenerateInputError("empty grid");
    const auto d = grid.data();
    return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

void write_grid_csv(const std::filesystem::path& path, const Tensor& grid) {
    if (grid.rank() != 2) throw ShapeError("grid must be a matrix");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    char buf[64];
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", grid.at(r, c));
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_grid_pgm(const std::filesystem::path& path, const Tensor& grid) {
    if (grid.rank() != 2) throw ShapeError("grid must be a matrix");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const auto d = grid.data();
    const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
    const double range = *hi - *lo;
    out << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
    for (double v : d) {
        const double scaled = range > 0.0 ? (v - *lo) / range * 255.0 : 0.0;
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
    }
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace d2c::cli
