#pragma once

#include <vector>

#include "d2c/encoders/text_encoder.hpp"
#include "d2c/fusion/gate.hpp"

namespace d2c::lm {

struct LMConfig {
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t width = 16;
    std::size_t vocab = 64;
    std::size_t ffn_width = 32;
    std::size_t max_seq_len = 128;

    void validate() const;
};

struct LMBlock {
    LayerNormWeights attn_norm;
    AttentionWeights attn;
    LayerNormWeights ffn_norm;
    Linear ffn_in;
    Linear ffn_out;
};

// Pre-norm decoder over [visual prefix; text]. The output projection is tied
// to the token embedding table.
struct LMWeights {
    Var embedding;
    std::vector<LMBlock> blocks;
    LayerNormWeights final_norm;
    Var output_bias;
};

// Registers the decoder blocks in the lm group; `embedding` (V×D) is shared.
LMWeights make_lm(ParameterSet& params, const LMConfig& cfg, const Var& embedding, Rng& rng);

// Attention mask for a sequence of `prefix` visual tokens followed by
// `text` tokens: visual tokens see each other, text position i sees every
// visual token and text positions ≤ i.
std::vector<unsigned char> prefix_causal_mask(std::size_t prefix, std::size_t text);

// Next-token logits (L_text × V) for every text position.
Var decode_logits(const fusion::ConditionedVisualFeatures& visual, const enc::TokenSequence& text,
                  const LMWeights& weights, const LMConfig& cfg);

// Mean over masked-in positions of -ln softmax(logits)[target].
Var nll_loss(const Var& logits, const enc::TokenSequence& targets, std::span<const unsigned char> mask);

// Greedy continuation of `prompt` until eos or `max_new_tokens`. Returns the
// generated ids, eos excluded.
std::vector<int> greedy_decode(const fusion::ConditionedVisualFeatures& visual,
                               const enc::TokenSequence& prompt, const LMWeights& weights,
                               const LMConfig& cfg, std::size_t max_new_tokens);

} // namespace d2c::lm
