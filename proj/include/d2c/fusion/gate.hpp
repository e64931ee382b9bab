#pragma once

#include "d2c/encoders/image_source.hpp"
#include "d2c/numcore/layers.hpp"

namespace d2c::fusion {

// Learnable gate: visual tokens go through `proj`, the fused text summary
// through `proj_g` scaled by tanh(beta).
struct GateState {
    Var beta;
    Linear proj;
    Linear proj_g;
};

constexpr double kDefaultBetaInit = 0.2;

// `proj` is registered in the projector group; `proj_g` and `beta` in gate.
GateState make_gate(ParameterSet& params, std::size_t width, Rng& rng,
                    double beta_init = kDefaultBetaInit);

// N²×D visual tokens conditioned on the text.
struct ConditionedVisualFeatures {
    Var matrix;

    std::size_t tokens() const { return matrix.value().rows(); }
};

// Proj(flattened xv) + broadcast(Proj_g(mean over rows of xvt)) · tanh(beta).
ConditionedVisualFeatures gate_combine(const enc::FeatureMap& xv, const Var& xvt,
                                       const GateState& gate);

} // namespace d2c::fusion
