#include "d2c/mfe/multiscale.hpp"

#include "d2c/numcore/errors.hpp"

namespace d2c::mfe {

std::size_t block_count(std::size_t scales) {
    std::size_t m = 0;
    std::size_t per_scale = 1;
    for (std::size_t s = 1; s <= scales; ++s, per_scale *= 4) m += per_scale;
    return m;
}

std::size_t required_divisor(std::size_t scales) {
    if (scales == 0) throw ParameterError("number of scales must be at least 1");
    return std::size_t{1} << (scales - 1);
}

std::size_t blocks_per_side(std::size_t scale) { return required_divisor(scale); }

BlockRegion block_region(std::size_t side, const BlockCoord& coord) {
    const std::size_t g = blocks_per_side(coord.scale);
    if (side % g != 0) throw PartitionError("grid side not divisible at scale " + std::to_string(coord.scale));
    if (coord.index >= g * g) throw ShapeError("block index out of range for its scale");
    const std::size_t size = side / g;
    return {(coord.index / g) * size, (coord.index % g) * size, size};
}

std::vector<BlockCoord> pyramid_index(std::size_t scales) {
    std::vector<BlockCoord> out;
    out.reserve(block_count(scales));
    for (std::size_t s = 1; s <= scales; ++s) {
        const std::size_t g = blocks_per_side(s);
        for (std::size_t t = 0; t < g * g; ++t) out.push_back({s, t});
    }
    return out;
}

Tensor pool_block(const Tensor& block) {
    if (block.rank() != 3) throw ShapeError("pool_block expects an h×w×D block");
    const std::size_t h = block.dim(0);
    const std::size_t w = block.dim(1);
    const std::size_t d = block.dim(2);
    if (h == 0 || w == 0 || d == 0) throw ShapeError("pool_block on an empty block");
    Tensor out({d});
    for (std::size_t c = 0; c < d; ++c) {
        double mx = block[c];
        double total = 0.0;
        for (std::size_t i = 0; i < h * w; ++i) {
            const double v = block[i * d + c];
            if (v > mx) mx = v;
            total += v;
        }
        out[c] = mx + total / static_cast<double>(h * w);
    }
    return out;
}

Var multiscale_pool(const Var& map, std::size_t scales) {
    const Tensor& x = map.value();
    if (x.rank() != 3 || x.dim(0) != x.dim(1)) {
        throw ShapeError("multiscale_pool expects an N×N×D map, got " + shape_string(x.shape()));
    }
    const std::size_t n = x.dim(0);
    const std::size_t d = x.dim(2);
    const std::size_t divisor = required_divisor(scales);
    if (n == 0 || d == 0) throw ShapeError("multiscale_pool on an empty map");
    if (n % divisor != 0) {
        throw PartitionError("grid side " + std::to_string(n) + " must be divisible by " +
                             std::to_string(divisor) + " for " + std::to_string(scales) + " scales");
    }
    const auto coords = pyramid_index(scales);
    const std::size_t m = coords.size();
    Tensor out({m, d});
    // Flat index into `x` of the max entry for every (row, channel).
    std::vector<std::size_t> argmax(m * d);
    for (std::size_t r = 0; r < m; ++r) {
        const BlockRegion reg = block_region(n, coords[r]);
        const auto area = static_cast<double>(reg.size * reg.size);
        for (std::size_t c = 0; c < d; ++c) {
            std::size_t best = (reg.row * n + reg.col) * d + c;
            double total = 0.0;
            for (std::size_t i = reg.row; i < reg.row + reg.size; ++i) {
                for (std::size_t j = reg.col; j < reg.col + reg.size; ++j) {
                    const std::size_t at = (i * n + j) * d + c;
                    if (x[at] > x[best]) best = at;
                    total += x[at];
                }
            }
            argmax[r * d + c] = best;
            out.at(r, c) = x[best] + total / area;
        }
    }
    return make_op(std::move(out), {map}, [n, d, coords, argmax = std::move(argmax)](Node& self) {
        auto g = self.value.grad();
        auto gx = parent_grad(self, 0);
        if (gx.empty()) return;
        for (std::size_t r = 0; r < coords.size(); ++r) {
            const BlockRegion reg = block_region(n, coords[r]);
            const double inv_area = 1.0 / static_cast<double>(reg.size * reg.size);
            for (std::size_t c = 0; c < d; ++c) {
                const double gr = g[r * d + c];
                gx[argmax[r * d + c]] += gr;
                for (std::size_t i = reg.row; i < reg.row + reg.size; ++i)
                    for (std::size_t j = reg.col; j < reg.col + reg.size; ++j)
                        gx[(i * n + j) * d + c] += gr * inv_area;
            }
        }
    });
}

MultiScaleFeatures extract_multiscale(const enc::FeatureMap& map, std::size_t scales) {
    return {multiscale_pool(Var::constant(map.grid()), scales), pyramid_index(scales)};
}

} // namespace d2c::mfe
