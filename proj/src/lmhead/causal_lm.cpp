#include "d2c/lmhead/causal_lm.hpp"

#include <algorithm>

#include "d2c/encoders/vocabulary.hpp"
#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"

namespace d2c::lm {

void LMConfig::validate() const {
    if (layers < 1) throw ParameterError("language model needs at least one layer");
    if (heads == 0 || width % heads != 0) throw ParameterError("LM width not divisible by heads");
    if (vocab < 4) throw ParameterError("LM vocabulary must hold at least 4 tokens");
    if (max_seq_len == 0 || ffn_width == 0) throw ParameterError("LM sizes must be positive");
}

LMWeights make_lm(ParameterSet& params, const LMConfig& cfg, const Var& embedding, Rng& rng) {
    cfg.validate();
    if (embedding.value().rank() != 2 || embedding.value().rows() != cfg.vocab ||
        embedding.value().cols() != cfg.width) {
        throw ShapeError("LM embedding must be vocab × width");
    }
    LMWeights w;
    w.embedding = embedding;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        const std::string p = "lm.block" + std::to_string(i);
        LMBlock b;
        b.attn_norm = make_layer_norm(params, p + ".attn_norm", ParamGroup::lm, cfg.width);
        b.attn = make_attention(params, p + ".attn", ParamGroup::lm, cfg.width, rng);
        b.ffn_norm = make_layer_norm(params, p + ".ffn_norm", ParamGroup::lm, cfg.width);
        b.ffn_in = make_linear(params, p + ".ffn_in", ParamGroup::lm, cfg.width, cfg.ffn_width, rng);
        b.ffn_out = make_linear(params, p + ".ffn_out", ParamGroup::lm, cfg.ffn_width, cfg.width, rng);
        w.blocks.push_back(std::move(b));
    }
    w.final_norm = make_layer_norm(params, "lm.final_norm", ParamGroup::lm, cfg.width);
    w.output_bias = params.add("lm.output_bias", ParamGroup::lm, Tensor({cfg.vocab}));
    return w;
}

std::vector<unsigned char> prefix_causal_mask(std::size_t prefix, std::size_t text) {
    const std::size_t n = prefix + text;
    std::vector<unsigned char> mask(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) mask[i * n + j] = (j < prefix || j <= i) ? 1 : 0;
    return mask;
}

Var decode_logits(const fusion::ConditionedVisualFeatures& visual, const enc::TokenSequence& text,
                  const LMWeights& weights, const LMConfig& cfg) {
    if (text.ids.empty()) throw ShapeError("LM needs at least one text token");
    const bool has_prefix = visual.matrix.valid() && visual.matrix.value().size() > 0;
    const std::size_t prefix = has_prefix ? visual.matrix.value().rows() : 0;
    const std::size_t n = prefix + text.ids.size();
    if (n > cfg.max_seq_len) {
        throw CapacityError("sequence of " + std::to_string(n) + " tokens exceeds LM capacity " +
                            std::to_string(cfg.max_seq_len));
    }
    if (has_prefix && visual.matrix.value().cols() != cfg.width) {
        throw ShapeError("visual tokens have width " + std::to_string(visual.matrix.value().cols()) +
                         ", LM expects " + std::to_string(cfg.width));
    }
    if (weights.blocks.size() != cfg.layers) throw ShapeError("LM weights do not match the config");

    Var tokens = ops::add(ops::gather_rows(weights.embedding, text.ids),
                          Var::constant(sinusoidal_positions(0, text.ids.size(), cfg.width)));
    Var x = has_prefix ? ops::concat_rows({visual.matrix, tokens}) : tokens;
    const auto mask = prefix_causal_mask(prefix, text.ids.size());
    for (const auto& b : weights.blocks) {
        Var h = b.attn_norm(x);
        x = ops::add(x, cross_attention(h, h, h, cfg.heads, b.attn, mask).output);
        x = ops::add(x, b.ffn_out(ops::gelu(b.ffn_in(b.ffn_norm(x)))));
    }
    Var text_states = weights.final_norm(ops::slice_rows(x, prefix, n));
    return ops::add_bias(ops::matmul_nt(text_states, weights.embedding), weights.output_bias);
}

Var nll_loss(const Var& logits, const enc::TokenSequence& targets, std::span<const unsigned char> mask) {
    return ops::nll_loss(logits, targets.ids, mask);
}

std::vector<int> greedy_decode(const fusion::ConditionedVisualFeatures& visual,
                               const enc::TokenSequence& prompt, const LMWeights& weights,
                               const LMConfig& cfg, std::size_t max_new_tokens) {
    NoGradGuard guard;
    enc::TokenSequence seq = prompt;
    std::vector<int> generated;
    for (std::size_t step = 0; step < max_new_tokens; ++step) {
        Var logits = decode_logits(visual, seq, weights, cfg);
        const Tensor& l = logits.value();
        const std::size_t last = l.rows() - 1;
        std::size_t best = 0;
        for (std::size_t c = 1; c < l.cols(); ++c)
            if (l.at(last, c) > l.at(last, best)) best = c;
        const int id = static_cast<int>(best);
        if (id == enc::Vocabulary::eos) break;
        generated.push_back(id);
        seq.ids.push_back(id);
    }
    return generated;
}

} // namespace d2c::lm
