#include "d2c/cli/gradcheck_suite.hpp"

#include "d2c/encoders/text_encoder.hpp"
#include "d2c/fusion/decoder.hpp"
#include "d2c/fusion/gate.hpp"
#include "d2c/lmhead/causal_lm.hpp"
#include "d2c/mfe/multiscale.hpp"
#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"
#include "d2c/semloss/semantic_loss.hpp"
#include "d2c/train/model.hpp"

namespace d2c::cli {
namespace {

using Objective = std::function<Var()>;

class Suite {
public:
    Suite(double eps, const std::function<void(const GradcheckRow&)>& on_row) : eps_(eps), on_row_(on_row) {}

    void check(const std::string& name, ParameterSet& ps, const Objective& f,
               const std::optional<std::string>& corrupt = {}) {
        GradCheckOptions opt;
        opt.eps = eps_;
        opt.corrupt_param = corrupt;
        GradcheckRow row{name, grad_check(f, ps, opt), false};
        row.passed = row.result.max_rel_error < kGradcheckTolerance;
        if (on_row_) on_row_(row);
        rows_.push_back(std::move(row));
    }

    std::vector<GradcheckRow> rows() && { return std::move(rows_); }

private:
    double eps_;
    const std::function<void(const GradcheckRow&)>& on_row_;
    std::vector<GradcheckRow> rows_;
};

void primitive_checks(Suite& suite, Rng& rng) {
    ParameterSet ps;
    Var a = ps.add("a", ParamGroup::lm, rng.normal_tensor({3, 4}, 1.0));
    Var b = ps.add("b", ParamGroup::lm, rng.normal_tensor({3, 4}, 1.0));
    Var m = ps.add("m", ParamGroup::lm, rng.normal_tensor({4, 5}, 1.0));
    Var bias = ps.add("bias", ParamGroup::lm, rng.normal_tensor({4}, 1.0));
    Var s = ps.add("s", ParamGroup::gate, Tensor::scalar(0.7));
    Var gamma = ps.add("gamma", ParamGroup::lm, rng.normal_tensor({4}, 1.0));
    const Tensor p34 = rng.normal_tensor({3, 4}, 1.0);
    const Tensor p35 = rng.normal_tensor({3, 5}, 1.0);
    const Tensor p43 = rng.normal_tensor({4, 3}, 1.0);
    const Tensor p33 = rng.normal_tensor({3, 3}, 1.0);
    const Tensor p4 = rng.normal_tensor({4}, 1.0);
    const Tensor p24 = rng.normal_tensor({2, 4}, 1.0);
    const std::vector<unsigned char> mask{1, 0, 1, 1, 1, 1, 0, 0, 0, 1, 1, 0};
    const std::vector<int> ids{2, 0, 2};
    const std::vector<int> targets{1, 3, 0};
    const std::vector<unsigned char> nll_mask{1, 0, 1};

    using ops::weighted_sum;
    suite.check("add", ps, [&] { return weighted_sum(ops::add(a, b), p34); });
    suite.check("sub", ps, [&] { return weighted_sum(ops::sub(a, b), p34); });
    suite.check("mul", ps, [&] { return weighted_sum(ops::mul(a, b), p34); });
    suite.check("scale", ps, [&] { return weighted_sum(ops::scale(a, -1.7), p34); });
    suite.check("scale_by", ps, [&] { return weighted_sum(ops::scale_by(a, s), p34); });
    suite.check("add_bias", ps, [&] { return weighted_sum(ops::add_bias(a, bias), p34); });
    suite.check("matmul", ps, [&] { return weighted_sum(ops::matmul(a, m), p35); });
    suite.check("matmul_nt", ps, [&] { return weighted_sum(ops::matmul_nt(a, b), p33); });
    suite.check("transpose", ps, [&] { return weighted_sum(ops::transpose(a), p43); });
    suite.check("reshape", ps, [&] { return weighted_sum(ops::reshape(a, {4, 3}), p43); });
    suite.check("tanh", ps, [&] { return weighted_sum(ops::tanh(a), p34); });
    suite.check("gelu", ps, [&] { return weighted_sum(ops::gelu(a), p34); });
    suite.check("layer_norm", ps, [&] { return weighted_sum(ops::layer_norm(a, gamma, bias), p34); });
    suite.check("softmax_rows", ps, [&] { return weighted_sum(ops::softmax_rows(a, 0.5), p34); });
    suite.check("softmax_rows_masked", ps, [&] { return weighted_sum(ops::softmax_rows(a, 1.0, mask), p34); });
    suite.check("softmax_temp", ps, [&] { return weighted_sum(ops::softmax_temp(ops::reshape(a, {12}), 0.3), p34.reshaped({12})); });
    suite.check("slice_rows", ps, [&] { return weighted_sum(ops::slice_rows(a, 1, 3), p24); });
    suite.check("slice_cols", ps, [&] { return weighted_sum(ops::slice_cols(a, 1, 4), p33); });
    suite.check("concat_rows", ps, [&] {
        return weighted_sum(ops::concat_rows({ops::slice_rows(a, 0, 2), ops::slice_rows(b, 2, 3)}), p34);
    });
    suite.check("concat_cols", ps, [&] {
        return weighted_sum(ops::concat_cols({ops::slice_cols(b, 0, 1), ops::slice_cols(a, 1, 4)}), p34);
    });
    suite.check("gather_rows", ps, [&] { return weighted_sum(ops::gather_rows(m, ids), p35); });
    suite.check("mean_rows", ps, [&] { return weighted_sum(ops::mean_rows(a), p4); });
    suite.check("broadcast_rows", ps, [&] { return weighted_sum(ops::broadcast_rows(bias, 3), p34); });
    suite.check("sum", ps, [&] { return ops::sum(ops::mul(a, a)); });
    suite.check("weighted_sum", ps, [&] { return weighted_sum(a, p34); });
    suite.check("stack", ps, [&] {
        return weighted_sum(ops::stack({ops::sum(ops::mul(a, b)), ops::sum(ops::tanh(b))}), Tensor::vector({0.3, -1.1}));
    });
    suite.check("cosine_sim", ps, [&] { return ops::cosine_sim(ops::reshape(a, {12}), ops::reshape(b, {12})); });
    suite.check("kl_div", ps, [&] {
        return ops::kl_div(ops::softmax_temp(ops::reshape(a, {12}), 0.5), ops::softmax_temp(ops::reshape(b, {12}), 0.5));
    });
    suite.check("nll_loss", ps, [&] { return ops::nll_loss(a, targets, nll_mask); });

    ParameterSet pool_ps;
    Var map = pool_ps.add("map", ParamGroup::projector, rng.normal_tensor({4, 4, 3}, 1.0));
    const Tensor probe = rng.normal_tensor({mfe::block_count(3), 3}, 1.0);
    suite.check("multiscale_pool", pool_ps, [&] { return weighted_sum(mfe::multiscale_pool(map, 3), probe); });

    ParameterSet att_ps;
    auto w = make_attention(att_ps, "attn", ParamGroup::fusion, 4, rng);
    Var q = att_ps.add("queries", ParamGroup::fusion, rng.normal_tensor({3, 4}, 1.0));
    Var kv = att_ps.add("memory", ParamGroup::fusion, rng.normal_tensor({5, 4}, 1.0));
    suite.check("attention", att_ps, [&] { return weighted_sum(cross_attention(q, kv, kv, 2, w).output, p34); });
}

void module_checks(Suite& suite, const ExperimentConfig& cfg, Rng& rng) {
    const std::size_t d = 4, vocab = 10;
    const enc::TokenSequence question{{1, 5, 7}};

    ParameterSet text_ps;
    Var emb = text_ps.add("embedding", ParamGroup::embedding, rng.normal_tensor({vocab, d}, 1.0));
    auto mlp = enc::make_mlp(text_ps, "text_mlp", ParamGroup::projector, d, 6, 2, rng);
    const Tensor p3d = rng.normal_tensor({3, d}, 1.0);
    suite.check("text_encoder", text_ps, [&] { return ops::weighted_sum(enc::encode_text(question, emb, mlp).matrix, p3d); });

    const enc::FeatureMap map(rng.normal_tensor({4, 4, d}, 1.0));
    const auto xv = mfe::extract_multiscale(map, 3);
    const fusion::FusionConfig fcfg{1, 2, d, 6};
    ParameterSet fusion_ps;
    Var xt_leaf = fusion_ps.add("text", ParamGroup::projector, rng.normal_tensor({3, d}, 1.0));
    auto fw = fusion::make_fusion(fusion_ps, fcfg, rng);
    suite.check("fusion_decoder", fusion_ps, [&] {
        return ops::weighted_sum(fusion::fuse(enc::TextFeatures{xt_leaf}, xv, fcfg, fw).xvt, p3d);
    });

    ParameterSet gate_ps;
    Var xvt_leaf = gate_ps.add("xvt", ParamGroup::fusion, rng.normal_tensor({3, d}, 1.0));
    auto gate = fusion::make_gate(gate_ps, d, rng);
    const Tensor p16 = rng.normal_tensor({16, d}, 1.0);
    suite.check("gate", gate_ps, [&] { return ops::weighted_sum(fusion::gate_combine(map, xvt_leaf, gate).matrix, p16); });

    ParameterSet sem_ps;
    Var av = sem_ps.add("visual_anchor", ParamGroup::gate, rng.normal_tensor({5, d}, 1.0));
    Var at = sem_ps.add("text_anchor", ParamGroup::projector, rng.normal_tensor({3, d}, 1.0));
    const sem::TextQueue queue(rng.normal_tensor({6, d}, 1.0), cfg.model.tau);
    suite.check("semantic_loss", sem_ps, [&] {
        return sem::semantic_loss(sem::semantic_distribution(sem::pool_semantic(av), queue),
                                  sem::semantic_distribution(sem::pool_semantic(at), queue));
    });

    lm::LMConfig lcfg;
    lcfg.layers = 1;
    lcfg.heads = 2;
    lcfg.width = d;
    lcfg.vocab = vocab;
    lcfg.ffn_width = 6;
    lcfg.max_seq_len = 16;
    ParameterSet lm_ps;
    Var lm_emb = lm_ps.add("embedding", ParamGroup::embedding, rng.normal_tensor({vocab, d}, 1.0));
    Var prefix = lm_ps.add("visual", ParamGroup::gate, rng.normal_tensor({4, d}, 1.0));
    auto lw = lm::make_lm(lm_ps, lcfg, lm_emb, rng);
    const std::vector<unsigned char> mask{0, 1, 1};
    suite.check("lm_decoder", lm_ps, [&] {
        return lm::nll_loss(lm::decode_logits({prefix}, question, lw, lcfg), {{5, 7, 2}}, mask);
    });
}

void full_objective_check(Suite& suite, const ExperimentConfig& cfg) {
    train::SyntheticConfig task = cfg.synth;
    task.side = cfg.gradcheck.side;
    auto data = train::make_synthetic_dataset(cfg.gradcheck.samples, task, cfg.heldout_data_seed());
    train::Model model(cfg.model, cfg.init_seed());
    // Move every gate path away from its initial value.
    model.params().get("gate.beta").tensor()[0] = 0.5;
    std::vector<sem::TextQueue> queues;
    for (const auto& s : data) queues.push_back(model.queue(s));
    std::optional<std::string> corrupt;
    if (!cfg.gradcheck.corrupt.empty()) corrupt = cfg.gradcheck.corrupt;
    suite.check(
        "full_objective", model.params(),
        [&] {
            std::vector<Var> terms;
            for (std::size_t i = 0; i < data.size(); ++i) {
                auto r = model.forward(data[i], queues[i]);
                terms.push_back(sem::total_loss(r.l_sem, r.l_nll, 1.0));
            }
            return ops::sum(ops::stack(terms));
        },
        corrupt);
}

} // namespace

std::vector<GradcheckRow> run_gradchecks(const ExperimentConfig& cfg,
                                         const std::function<void(const GradcheckRow&)>& on_row) {
    cfg.validate();
    if (!cfg.gradcheck.corrupt.empty() && !train::Model(cfg.model, cfg.init_seed()).params().contains(cfg.gradcheck.corrupt)) {
        throw LookupError("cannot corrupt unknown parameter '" + cfg.gradcheck.corrupt + "'");
    }
    Suite suite(cfg.gradcheck.eps, on_row);
    Rng rng(cfg.init_seed() + 101);
    primitive_checks(suite, rng);
    module_checks(suite, cfg, rng);
    full_objective_check(suite, cfg);
    return std::move(suite).rows();
}

} // namespace d2c::cli
