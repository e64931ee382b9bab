#include "d2c/fusion/gate.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"

namespace d2c::fusion {

GateState make_gate(ParameterSet& params, std::size_t width, Rng& rng, double beta_init) {
    GateState g;
    g.beta = params.add("gate.beta", ParamGroup::gate, Tensor::scalar(beta_init));
    g.proj = make_linear(params, "gate.proj", ParamGroup::projector, width, width, rng);
    g.proj_g = make_linear(params, "gate.proj_g", ParamGroup::gate, width, width, rng);
    return g;
}

ConditionedVisualFeatures gate_combine(const enc::FeatureMap& xv, const Var& xvt,
                                       const GateState& gate) {
    if (gate.beta.value().size() != 1) throw ShapeError("gate beta must be a scalar");
    const std::size_t d = xv.width();
    if (xvt.value().rank() != 2 || xvt.value().cols() != d || xvt.value().rows() == 0) {
        throw ShapeError("gate_combine: fused features " + shape_string(xvt.shape()) +
                         " incompatible with visual width " + std::to_string(d));
    }
    if (gate.proj.in_features() != d || gate.proj_g.in_features() != d) {
        throw ShapeError("gate_combine: projection width mismatch");
    }
    const std::size_t tokens = xv.side() * xv.side();
    Var visual = gate.proj(Var::constant(xv.flattened()));
    Var summary = gate.proj_g(ops::reshape(ops::mean_rows(xvt), {1, d}));
    Var gated = ops::scale_by(summary, ops::tanh(gate.beta));
    return {ops::add(visual, ops::broadcast_rows(ops::reshape(gated, {d}), tokens))};
}

} // namespace d2c::fusion
