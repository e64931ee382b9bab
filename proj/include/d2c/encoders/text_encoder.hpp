#pragma once

#include <vector>

#include "d2c/numcore/layers.hpp"

namespace d2c::enc {

struct TokenSequence {
    std::vector<int> ids;
};

// L×D text representation in the image feature space.
struct TextFeatures {
    Var matrix;

    std::size_t length() const { return matrix.value().rows(); }
};

// Stack of affine layers with GELU between consecutive layers; a depth-1
// MLP is a single affine map.
struct Mlp {
    std::vector<Linear> layers;

    Var operator()(const Var& x) const;
};

Mlp make_mlp(ParameterSet& params, const std::string& prefix, ParamGroup group,
             std::size_t width, std::size_t hidden, std::size_t depth, Rng& rng);

// Embedding lookup followed by the row-wise MLP.
TextFeatures encode_text(const TokenSequence& seq, const Var& embedding, const Mlp& mlp);

// Text features plus fixed sinusoidal position offsets, used as fusion queries.
Var with_positions(const TextFeatures& features);

} // namespace d2c::enc
