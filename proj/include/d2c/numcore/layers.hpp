#pragma once

#include <span>
#include <string>

#include "d2c/numcore/parameter.hpp"
#include "d2c/numcore/rng.hpp"

namespace d2c {

// x · W + b with W stored as (in × out). A missing bias is allowed.
struct Linear {
    Var weight;
    Var bias;

    Var operator()(const Var& x) const;
    std::size_t in_features() const { return weight.value().rows(); }
    std::size_t out_features() const { return weight.value().cols(); }
};

// Registers `<prefix>.weight` (and `<prefix>.bias`) with N(0, 1/in) weights
// and zero bias.
Linear make_linear(ParameterSet& params, const std::string& prefix, ParamGroup group,
                   std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

struct LayerNormWeights {
    Var gamma;
    Var beta;

    Var operator()(const Var& x) const;
};

LayerNormWeights make_layer_norm(ParameterSet& params, const std::string& prefix,
                                 ParamGroup group, std::size_t width);

// Multi-head attention projections. Keys carry no bias: a key bias shifts
// every score in a row equally and has no effect after the softmax.
struct AttentionWeights {
    Linear query;
    Linear key;
    Linear value;
    Linear output;
};

AttentionWeights make_attention(ParameterSet& params, const std::string& prefix,
                                ParamGroup group, std::size_t width, Rng& rng);

struct AttentionResult {
    Var output;
    // heads × L × M attention probabilities.
    Tensor weights;
};

// Scaled dot-product multi-head attention of L queries over M keys/values,
// all of width D. `allowed` optionally masks (L × M) score entries.
AttentionResult cross_attention(const Var& queries, const Var& keys, const Var& values,
                                std::size_t heads, const AttentionWeights& w,
                                std::span<const unsigned char> allowed = {});

// Fixed sinusoidal offsets for positions [first, first + count).
Tensor sinusoidal_positions(std::size_t first, std::size_t count, std::size_t width);

} // namespace d2c
