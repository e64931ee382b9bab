#include "d2c/numcore/layers.hpp"

#include <cmath>

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"

namespace d2c {

Var Linear::operator()(const Var& x) const {
    Var y = ops::matmul(x, weight);
    return bias.valid() ? ops::add_bias(y, bias) : y;
}

Linear make_linear(ParameterSet& params, const std::string& prefix, ParamGroup group,
                   std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
    Linear l;
    l.weight = params.add(prefix + ".weight", group,
                          rng.normal_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in))));
    if (with_bias) l.bias = params.add(prefix + ".bias", group, Tensor({out}));
    return l;
}

Var LayerNormWeights::operator()(const Var& x) const { return ops::layer_norm(x, gamma, beta); }

LayerNormWeights make_layer_norm(ParameterSet& params, const std::string& prefix,
                                 ParamGroup group, std::size_t width) {
    return {params.add(prefix + ".gamma", group, Tensor::filled({width}, 1.0)),
            params.add(prefix + ".beta", group, Tensor({width}))};
}

AttentionWeights make_attention(ParameterSet& params, const std::string& prefix,
                                ParamGroup group, std::size_t width, Rng& rng) {
    AttentionWeights w;
    w.query = make_linear(params, prefix + ".query", group, width, width, rng);
    w.key = make_linear(params, prefix + ".key", group, width, width, rng, false);
    w.value = make_linear(params, prefix + ".value", group, width, width, rng);
    w.output = make_linear(params, prefix + ".output", group, width, width, rng);
    return w;
}

AttentionResult cross_attention(const Var& queries, const Var& keys, const Var& values,
                                std::size_t heads, const AttentionWeights& w,
                                std::span<const unsigned char> allowed) {
    if (queries.value().rank() != 2 || keys.value().rank() != 2 || values.value().rank() != 2) {
        throw ShapeError("attention inputs must be matrices");
    }
    const std::size_t l = queries.value().rows();
    const std::size_t m = keys.value().rows();
    const std::size_t d = queries.value().cols();
    if (l == 0 || m == 0) throw ShapeError("attention needs at least one query and one key");
    if (keys.value().cols() != d || values.value().cols() != d || values.value().rows() != m) {
        throw ShapeError("attention: queries " + shape_string(queries.shape()) + ", keys " +
                         shape_string(keys.shape()) + ", values " + shape_string(values.shape()) +
                         " are incompatible");
    }
    if (heads == 0 || d % heads != 0) {
        throw ShapeError("attention: width " + std::to_string(d) + " not divisible by " +
                         std::to_string(heads) + " heads");
    }
    if (w.query.in_features() != d) throw ShapeError("attention: projection width mismatch");

    const std::size_t dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Var q = w.query(queries);
    Var k = w.key(keys);
    Var v = w.value(values);

    AttentionResult result;
    result.weights = Tensor({heads, l, m});
    std::vector<Var> head_outputs;
    head_outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = heads == 1 ? q : ops::slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = heads == 1 ? k : ops::slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = heads == 1 ? v : ops::slice_cols(v, h * dh, (h + 1) * dh);
        Var probs = ops::softmax_rows(ops::scale(ops::matmul_nt(qh, kh), scale), 1.0, allowed);
        auto src = probs.value().data();
        std::copy(src.begin(), src.end(), result.weights.data().begin() + static_cast<std::ptrdiff_t>(h * l * m));
        head_outputs.push_back(ops::matmul(probs, vh));
    }
    Var joined = heads == 1 ? head_outputs.front() : ops::concat_cols(head_outputs);
    result.output = w.output(joined);
    return result;
}

Tensor sinusoidal_positions(std::size_t first, std::size_t count, std::size_t width) {
    Tensor pe({count, width});
    for (std::size_t p = 0; p < count; ++p) {
        const double pos = static_cast<double>(first + p);
        for (std::size_t i = 0; i < width; ++i) {
            const double rate =
                std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
            pe.at(p, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
        }
    }
    return pe;
}

} // namespace d2c
