#include "d2c/encoders/text_encoder.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"

namespace d2c::enc {

Var Mlp::operator()(const Var& x) const {
    Var h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (i > 0) h = ops::gelu(h);
        h = layers[i](h);
    }
    return h;
}

Mlp make_mlp(ParameterSet& params, const std::string& prefix, ParamGroup group,
             std::size_t width, std::size_t hidden, std::size_t depth, Rng& rng) {
    if (depth == 0) throw ParameterError("MLP depth must be at least 1");
    Mlp mlp;
    for (std::size_t i = 0; i < depth; ++i) {
        const std::size_t in = i == 0 ? width : hidden;
        const std::size_t out = i + 1 == depth ? width : hidden;
        mlp.layers.push_back(make_linear(params, prefix + ".layer" + std::to_string(i), group, in, out, rng));
    }
    return mlp;
}

TextFeatures encode_text(const TokenSequence& seq, const Var& embedding, const Mlp& mlp) {
    if (seq.ids.empty()) throw ShapeError("cannot encode an empty token sequence");
    return TextFeatures{mlp(ops::gather_rows(embedding, seq.ids))};
}

Var with_positions(const TextFeatures& features) {
    const Tensor& x = features.matrix.value();
    return ops::add(features.matrix, Var::constant(sinusoidal_positions(0, x.rows(), x.cols())));
}

} // namespace d2c::enc
