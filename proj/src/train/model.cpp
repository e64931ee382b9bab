#include "d2c/train/model.hpp"

#include "d2c/numcore/errors.hpp"

namespace d2c::train {

void ModelConfig::validate() const {
    if (width == 0 || text_hidden == 0 || text_depth == 0) throw ParameterError("model sizes must be positive");
    if (scales < 1) throw ParameterError("need at least one scale");
    if (fusion.width != width) throw ParameterError("fusion width must equal the model width");
    if (!(embedding_scale > 0.0)) throw ParameterError("embedding scale must be positive");
    if (!(tau > 0.0)) throw ParameterError("temperature must be positive");
    fusion.validate();
    lm_config().validate();
}

lm::LMConfig ModelConfig::lm_config() const {
    lm::LMConfig c = lm;
    c.width = width;
    c.vocab = vocab;
    return c;
}

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    embedding_ = params_.add("embedding", ParamGroup::embedding,
                             rng.normal_tensor({cfg_.vocab, cfg_.width}, cfg_.embedding_scale));
    text_mlp_ = enc::make_mlp(params_, "text_mlp", ParamGroup::projector, cfg_.width, cfg_.text_hidden,
                              cfg_.text_depth, rng);
    fusion_ = fusion::make_fusion(params_, cfg_.fusion, rng);
    gate_ = fusion::make_gate(params_, cfg_.width, rng, cfg_.beta_init);
    lm_ = lm::make_lm(params_, cfg_.lm_config(), embedding_, rng);
}

sem::TextQueue Model::queue(const SyntheticSample& sample) const {
    return sem::build_queue(sample.captions, embedding_, text_mlp_, cfg_.tau);
}

fusion::ConditionedVisualFeatures Model::condition(const SyntheticSample& sample,
                                                   fusion::FusionOutput* fused) const {
    if (sample.map.width() != cfg_.width) {
        throw ShapeError("feature map width " + std::to_string(sample.map.width()) +
                         " does not match model width " + std::to_string(cfg_.width));
    }
    auto xt = enc::encode_text(sample.question, embedding_, text_mlp_);
    auto xv = mfe::extract_multiscale(sample.map, cfg_.scales);
    auto out = fusion::fuse(enc::TextFeatures{enc::with_positions(xt)}, xv, cfg_.fusion, fusion_);
    auto visual = fusion::gate_combine(sample.map, out.xvt, gate_);
    if (fused) *fused = std::move(out);
    return visual;
}

ForwardResult Model::forward(const SyntheticSample& sample) const { return forward(sample, queue(sample)); }

ForwardResult Model::forward(const SyntheticSample& sample, const sem::TextQueue& q) const {
    ForwardResult r;
    r.visual = condition(sample, &r.fusion);
    const auto ex = lm_example(sample);
    r.l_nll = lm::nll_loss(lm::decode_logits(r.visual, ex.inputs, lm_, cfg_.lm_config()), ex.targets, ex.mask);

    auto xt = enc::encode_text(sample.question, embedding_, text_mlp_);
    auto pv = sem::semantic_distribution(sem::pool_semantic(r.visual.matrix), q);
    auto pt = sem::semantic_distribution(sem::pool_semantic(xt.matrix), q);
    r.l_sem = sem::semantic_loss(pv, pt);
    return r;
}

std::vector<int> Model::answer(const SyntheticSample& sample, std::size_t max_new_tokens) const {
    NoGradGuard guard;
    return lm::greedy_decode(condition(sample), sample.question, lm_, cfg_.lm_config(), max_new_tokens);
}

double answer_accuracy(const Model& model, const std::vector<SyntheticSample>& data) {
    if (data.empty()) throw DegenerateInputError("accuracy over an empty dataset");
    std::size_t correct = 0;
    for (const auto& s : data) {
        std::vector<int> want(s.answer.ids.begin(), s.answer.ids.end() - 1);
        if (model.answer(s, want.size() + 1) == want) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_semantic_loss(const Model& model, const std::vector<SyntheticSample>& data) {
    if (data.empty()) throw DegenerateInputError("semantic loss over an empty dataset");
    NoGradGuard guard;
    double total = 0.0;
    for (const auto& s : data) total += model.forward(s).l_sem.item();
    return total / static_cast<double>(data.size());
}

} // namespace d2c::train
