#include <algorithm>

#include "doctest.h"

#include "d2c/mfe/multiscale.hpp"
#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/gradcheck.hpp"
#include "d2c/numcore/ops.hpp"
#include "d2c/numcore/rng.hpp"

using namespace d2c;
using namespace d2c::mfe;

namespace {

// Naive oracle: walks every scale and block with explicit loops.
std::vector<std::vector<double>> brute_force_pyramid(const Tensor& map, std::size_t scales) {
    const std::size_t n = map.dim(0);
    const std::size_t d = map.dim(2);
    std::vector<std::vector<double>> rows;
    for (std::size_t s = 1; s <= scales; ++s) {
        std::size_t g = 1;
        for (std::size_t k = 1; k < s; ++k) g *= 2;
        const std::size_t bs = n / g;
        for (std::size_t by = 0; by < g; ++by) {
            for (std::size_t bx = 0; bx < g; ++bx) {
                std::vector<double> row(d);
                for (std::size_t c = 0; c < d; ++c) {
                    double mx = map[((by * bs) * n + bx * bs) * d + c];
                    double total = 0.0;
                    for (std::size_t y = by * bs; y < (by + 1) * bs; ++y) {
                        for (std::size_t x = bx * bs; x < (bx + 1) * bs; ++x) {
                            const double v = map[(y * n + x) * d + c];
                            mx = std::max(mx, v);
                            total += v;
                        }
                    }
                    row[c] = mx + total / static_cast<double>(bs * bs);
                }
                rows.push_back(row);
            }
        }
    }
    return rows;
}

} // namespace

TEST_CASE("pool_block examples") {
    CHECK(pool_block(Tensor::filled({3, 2, 2}, 1.25)) == Tensor::vector({2.5, 2.5}));
    CHECK(pool_block(Tensor({2, 2, 1}, {1, 2, 3, 4}))[0] == 6.5);
    CHECK(pool_block(Tensor({1, 1, 3}, {0.5, -1.0, 3.0})) == Tensor::vector({1.0, -2.0, 6.0}));
    CHECK_THROWS_AS(pool_block(Tensor({0, 2, 1})), ShapeError);
    CHECK_THROWS_AS(pool_block(Tensor({2, 2})), ShapeError);
}

TEST_CASE("block counts follow the geometric sum") {
    CHECK(block_count(1) == 1);
    CHECK(block_count(2) == 5);
    CHECK(block_count(6) == 1 + 4 + 16 + 64 + 256 + 1024);
    CHECK(block_count(6) == 1365);
    CHECK(required_divisor(6) == 32);
}

TEST_CASE("extract_multiscale examples") {
    enc::FeatureMap single(Tensor({2, 2, 1}, {1, 2, 3, 4}));
    auto one = extract_multiscale(single, 1);
    CHECK(one.rows() == 1);
    CHECK(one.matrix.value().at(0, 0) == 6.5);

    auto two = extract_multiscale(single, 2);
    CHECK(two.matrix.value() == Tensor::matrix(5, 1, {6.5, 2, 4, 6, 8}));
    CHECK(two.index[0] == BlockCoord{1, 0});
    CHECK(two.index[3] == BlockCoord{2, 2});

    auto map = enc::provide_image({32, 2, 1});
    CHECK(extract_multiscale(map, 6).matrix.value().rows() == 1365);
}

TEST_CASE("non-divisible grids are rejected with the divisor named") {
    auto map = enc::provide_image({12, 2, 1});
    CHECK_NOTHROW(extract_multiscale(map, 3));
    try {
        extract_multiscale(map, 4);
        FAIL("expected a partition error");
    } catch (const PartitionError& e) {
        CHECK(std::string(e.what()).find("divisible by 8") != std::string::npos);
    }
    CHECK_THROWS_AS(extract_multiscale(map, 0), ParameterError);
}

TEST_CASE("extract_multiscale matches the brute-force pooler exactly") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = std::size_t{4} << rng.index(4);
        const std::size_t d = 1 + rng.index(8);
        std::size_t max_s = 1;
        while (n % (std::size_t{1} << max_s) == 0 && max_s < 6) ++max_s;
        const std::size_t s = 1 + rng.index(max_s);
        Tensor grid = rng.normal_tensor({n, n, d}, 3.0);
        auto got = extract_multiscale(enc::FeatureMap(grid), s);
        auto want = brute_force_pyramid(grid, s);
        REQUIRE(got.rows() == want.size());
        for (std::size_t r = 0; r < want.size(); ++r)
            for (std::size_t c = 0; c < d; ++c) CHECK(got.matrix.value().at(r, c) == want[r][c]);
    }
}

TEST_CASE("channel permutation permutes output columns") {
    Rng rng(5);
    Tensor grid = rng.normal_tensor({8, 8, 3}, 1.0);
    Tensor permuted({8, 8, 3});
    const std::size_t perm[] = {2, 0, 1};
    for (std::size_t p = 0; p < 64; ++p)
        for (std::size_t c = 0; c < 3; ++c) permuted[p * 3 + c] = grid[p * 3 + perm[c]];
    auto a = extract_multiscale(enc::FeatureMap(grid), 3).matrix.value();
    auto b = extract_multiscale(enc::FeatureMap(permuted), 3).matrix.value();
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < 3; ++c) CHECK(b.at(r, c) == a.at(r, perm[c]));
}

TEST_CASE("adding a constant shifts every output by twice the constant") {
    Rng rng(6);
    Tensor grid = rng.normal_tensor({8, 8, 2}, 1.0);
    Tensor shifted = grid;
    for (double& v : shifted.data()) v += 0.75;
    auto a = extract_multiscale(enc::FeatureMap(grid), 4).matrix.value();
    auto b = extract_multiscale(enc::FeatureMap(shifted), 4).matrix.value();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] - a[i] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("pyramid pooling gradient") {
    Rng rng(7);
    ParameterSet ps;
    Var map = ps.add("map", ParamGroup::projector, rng.normal_tensor({4, 4, 3}, 1.0));
    Tensor probe = rng.normal_tensor({5, 3}, 1.0);
    auto r = grad_check([&] { return ops::weighted_sum(multiscale_pool(map, 2), probe); }, ps);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("max gradient routes to the first maximal entry") {
    ParameterSet ps;
    // Two tied maxima at (0,1) and (1,0); the row-major first one wins.
    Var map = ps.add("map", ParamGroup::projector, Tensor({2, 2, 1}, {1.0, 5.0, 5.0, 2.0}));
    multiscale_pool(map, 1).backward();
    auto g = map.grad();
    CHECK(g[0] == 0.25);
    CHECK(g[1] == 1.25);
    CHECK(g[2] == 0.25);
    CHECK(g[3] == 0.25);
}
