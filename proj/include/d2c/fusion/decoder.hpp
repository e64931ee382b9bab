#pragma once

#include <vector>

#include "d2c/encoders/text_encoder.hpp"
#include "d2c/mfe/multiscale.hpp"
#include "d2c/numcore/layers.hpp"

namespace d2c::fusion {

struct FusionConfig {
    std::size_t layers = 12;
    std::size_t heads = 2;
    std::size_t width = 16;
    std::size_t ffn_width = 64;

    // Desk-scale settings used by tests and the toy experiment.
    static FusionConfig toy() { return {2, 2, 16, 32}; }
    void validate() const;
};

// Pre-norm decoder block: self-attention over the text queries, attention
// from queries to the multi-scale image features, then a GELU feed-forward.
// Each sub-block is residual.
struct DecoderLayer {
    LayerNormWeights self_norm;
    AttentionWeights self_attn;
    LayerNormWeights cross_norm;
    AttentionWeights cross_attn;
    LayerNormWeights ffn_norm;
    Linear ffn_in;
    Linear ffn_out;
};

struct FusionWeights {
    std::vector<DecoderLayer> layers;
    LayerNormWeights final_norm;
};

FusionWeights make_fusion(ParameterSet& params, const FusionConfig& cfg, Rng& rng);

struct FusionOutput {
    // L×D text-contextualized image representation.
    Var xvt;
    // One heads×L×M cross-attention tensor per decoder layer.
    std::vector<Tensor> attn_maps;
};

FusionOutput fuse(const enc::TextFeatures& xt, const mfe::MultiScaleFeatures& xv_multi,
                  const FusionConfig& cfg, const FusionWeights& weights);

// Fuses several texts against the same image features in one stacked pass.
// Self-attention is restricted to each text's own rows, so every result is
// identical to fusing that text alone.
std::vector<FusionOutput> fuse_batch(const std::vector<enc::TextFeatures>& texts,
                                     const mfe::MultiScaleFeatures& xv_multi,
                                     const FusionConfig& cfg, const FusionWeights& weights);

} // namespace d2c::fusion
