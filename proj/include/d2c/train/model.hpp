#pragma once

#include <vector>

#include "d2c/fusion/decoder.hpp"
#include "d2c/fusion/gate.hpp"
#include "d2c/lmhead/causal_lm.hpp"
#include "d2c/semloss/semantic_loss.hpp"
#include "d2c/train/synthetic.hpp"

namespace d2c::train {

struct ModelConfig {
    std::size_t width = 16;
    std::size_t scales = 3;
    std::size_t vocab = 64;
    std::size_t text_hidden = 32;
    std::size_t text_depth = 2;
    double embedding_scale = 1.0;
    fusion::FusionConfig fusion = fusion::FusionConfig::toy();
    // Width and vocab are taken from the fields above.
    lm::LMConfig lm;
    double tau = sem::kDefaultTau;
    double beta_init = fusion::kDefaultBetaInit;

    void validate() const;
    lm::LMConfig lm_config() const;
};

struct ForwardResult {
    Var l_sem;
    Var l_nll;
    fusion::FusionOutput fusion;
    fusion::ConditionedVisualFeatures visual;
};

// Text encoder, multi-scale fusion, gate and toy LM over one shared token
// embedding. Not copyable: parameters are shared handles.
class Model {
public:
    Model(ModelConfig cfg, std::uint64_t seed);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;

    const ModelConfig& config() const noexcept { return cfg_; }
    ParameterSet& params() noexcept { return params_; }
    const ParameterSet& params() const noexcept { return params_; }
    const fusion::GateState& gate() const noexcept { return gate_; }

    // The queue is rebuilt from the current encoder and treated as constant.
    ForwardResult forward(const SyntheticSample& sample) const;
    ForwardResult forward(const SyntheticSample& sample, const sem::TextQueue& queue) const;
    sem::TextQueue queue(const SyntheticSample& sample) const;
    fusion::ConditionedVisualFeatures condition(const SyntheticSample& sample,
                                                fusion::FusionOutput* fused = nullptr) const;
    // Greedy answer tokens, eos excluded.
    std::vector<int> answer(const SyntheticSample& sample, std::size_t max_new_tokens = 4) const;

private:
    ModelConfig cfg_;
    ParameterSet params_;
    Var embedding_;
    enc::Mlp text_mlp_;
    fusion::FusionWeights fusion_;
    fusion::GateState gate_;
    lm::LMWeights lm_;
};

// Fraction of samples whose greedy answer equals the reference answer.
double answer_accuracy(const Model& model, const std::vector<SyntheticSample>& data);

// Mean semantic loss over `data`, without building a graph.
double mean_semantic_loss(const Model& model, const std::vector<SyntheticSample>& data);

} // namespace d2c::train
