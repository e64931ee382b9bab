#include "d2c/fusion/decoder.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"

namespace d2c::fusion {

void FusionConfig::validate() const {
    if (layers < 1) throw ParameterError("fusion decoder needs at least one layer");
    if (heads == 0 || width % heads != 0) {
        throw ParameterError("fusion width " + std::to_string(width) + " not divisible by " +
                             std::to_string(heads) + " heads");
    }
    if (ffn_width == 0) throw ParameterError("fusion feed-forward width must be positive");
}

FusionWeights make_fusion(ParameterSet& params, const FusionConfig& cfg, Rng& rng) {
    cfg.validate();
    FusionWeights w;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string p = "fusion.layer" + std::to_string(i);
        DecoderLayer layer;
        layer.self_norm = make_layer_norm(params, p + ".self_norm", ParamGroup::fusion, cfg.width);
        layer.self_attn = make_attention(params, p + ".self_attn", ParamGroup::fusion, cfg.width, rng);
        layer.cross_norm = make_layer_norm(params, p + ".cross_norm", ParamGroup::fusion, cfg.width);
        layer.cross_attn = make_attention(params, p + ".cross_attn", ParamGroup::fusion, cfg.width, rng);
        layer.ffn_norm = make_layer_norm(params, p + ".ffn_norm", ParamGroup::fusion, cfg.width);
        layer.ffn_in = make_linear(params, p + ".ffn_in", ParamGroup::fusion, cfg.width, cfg.ffn_width, rng);
        layer.ffn_out = make_linear(params, p + ".ffn_out", ParamGroup::fusion, cfg.ffn_width, cfg.width, rng);
        w.layers.push_back(std::move(layer));
    }
    w.final_norm = make_layer_norm(params, "fusion.final_norm", ParamGroup::fusion, cfg.width);
    return w;
}

namespace {

FusionOutput run_decoder(const Var& queries, const Var& memory, const FusionConfig& cfg,
                         const FusionWeights& weights, std::span<const unsigned char> self_mask) {
    if (weights.layers.size() != cfg.layers) {
        throw ShapeError("fusion weights have " + std::to_string(weights.layers.size()) +
                         " layers, config expects " + std::to_string(cfg.layers));
    }
    FusionOutput out;
    Var x = queries;
    for (const auto& layer : weights.layers) {
        Var h = layer.self_norm(x);
        x = ops::add(x, cross_attention(h, h, h, cfg.heads, layer.self_attn, self_mask).output);
        auto cross = cross_attention(layer.cross_norm(x), memory, memory, cfg.heads, layer.cross_attn);
        x = ops::add(x, cross.output);
        out.attn_maps.push_back(std::move(cross.weights));
        x = ops::add(x, layer.ffn_out(ops::gelu(layer.ffn_in(layer.ffn_norm(x)))));
    }
    out.xvt = weights.final_norm(x);
    return out;
}

void check_widths(const enc::TextFeatures& xt, const mfe::MultiScaleFeatures& xv, std::size_t width) {
    if (xt.matrix.value().rank() != 2 || xt.length() == 0) throw ShapeError("fusion needs at least one text row");
    if (xv.matrix.value().rank() != 2 || xv.matrix.value().rows() == 0) {
        throw ShapeError("fusion needs at least one image feature row");
    }
    if (xt.matrix.value().cols() != width || xv.matrix.value().cols() != width) {
        throw ShapeError("fusion width mismatch: text " + std::to_string(xt.matrix.value().cols()) +
                         ", image " + std::to_string(xv.matrix.value().cols()) + ", config " +
                         std::to_string(width));
    }
}

} // namespace

FusionOutput fuse(const enc::TextFeatures& xt, const mfe::MultiScaleFeatures& xv_multi,
                  const FusionConfig& cfg, const FusionWeights& weights) {
    check_widths(xt, xv_multi, cfg.width);
    return run_decoder(xt.matrix, xv_multi.matrix, cfg, weights, {});
}

std::vector<FusionOutput> fuse_batch(const std::vector<enc::TextFeatures>& texts,
                                     const mfe::MultiScaleFeatures& xv_multi,
                                     const FusionConfig& cfg, const FusionWeights& weights) {
    if (texts.empty()) return {};
    std::vector<Var> parts;
    std::vector<std::size_t> offsets{0};
    for (const auto& t : texts) {
        check_widths(t, xv_multi, cfg.width);
        parts.push_back(t.matrix);
        offsets.push_back(offsets.back() + t.length());
    }
    const std::size_t total = offsets.back();
    std::vector<unsigned char> mask(total * total, 0);
    for (std::size_t k = 0; k < texts.size(); ++k)
        for (std::size_t i = offsets[k]; i < offsets[k + 1]; ++i)
            for (std::size_t j = offsets[k]; j < offsets[k + 1]; ++j) mask[i * total + j] = 1;

    FusionOutput joint = run_decoder(ops::concat_rows(parts), xv_multi.matrix, cfg, weights, mask);
    std::vector<FusionOutput> out;
    const std::size_t m = xv_multi.matrix.value().rows();
    for (std::size_t k = 0; k < texts.size(); ++k) {
        FusionOutput one;
        const std::size_t l = offsets[k + 1] - offsets[k];
        one.xvt = ops::slice_rows(joint.xvt, offsets[k], offsets[k + 1]);
        for (const Tensor& a : joint.attn_maps) {
            const std::size_t heads = a.dim(0);
            Tensor sub({heads, l, m});
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t i = 0; i < l; ++i)
                    for (std::size_t j = 0; j < m; ++j)
                        sub[(h * l + i) * m + j] = a[(h * total + offsets[k] + i) * m + j];
            one.attn_maps.push_back(std::move(sub));
        }
        out.push_back(std::move(one));
    }
    return out;
}

} // namespace d2c::fusion
