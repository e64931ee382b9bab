#include <cmath>

#include "doctest.h"

#include "d2c/encoders/vocabulary.hpp"
#include "d2c/lmhead/causal_lm.hpp"
#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/gradcheck.hpp"
#include "d2c/numcore/ops.hpp"

using namespace d2c;
using namespace d2c::lm;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

std::vector<double> vec_of(const Var& v) { return {v.value().data().begin(), v.value().data().end()}; }

Mat affine(const Mat& x, const Linear& l) {
    Mat w = to_mat(l.weight.value());
    std::vector<double> b = l.bias.valid() ? vec_of(l.bias) : std::vector<double>(w[0].size(), 0.0);
    Mat out(x.size(), std::vector<double>(w[0].size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < w[0].size(); ++j) {
            double acc = b[j];
            for (std::size_t k = 0; k < w.size(); ++k) acc += x[i][k] * w[k][j];
            out[i][j] = acc;
        }
    return out;
}

Mat norm(const Mat& x, const LayerNormWeights& ln) {
    auto g = vec_of(ln.gamma);
    auto b = vec_of(ln.beta);
    Mat out = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double n = static_cast<double>(x[i].size());
        double mean = 0.0, var = 0.0;
        for (double v : x[i]) mean += v / n;
        for (double v : x[i]) var += (v - mean) * (v - mean) / n;
        for (std::size_t j = 0; j < x[i].size(); ++j) out[i][j] = g[j] * (x[i][j] - mean) / std::sqrt(var + 1e-5) + b[j];
    }
    return out;
}

// One-head attention where row i may look at j < prefix or j <= i.
Mat masked_self_attention(const Mat& x, const AttentionWeights& w, std::size_t prefix) {
    Mat q = affine(x, w.query), k = affine(x, w.key), v = affine(x, w.value);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q[0].size()));
    Mat ctx(x.size(), std::vector<double>(v[0].size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::vector<double> s(x.size(), -INFINITY);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (!(j < prefix || j <= i)) continue;
            double d = 0.0;
            for (std::size_t c = 0; c < q[i].size(); ++c) d += q[i][c] * k[j][c];
            s[j] = d * scale;
            mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (auto& e : s) { e = std::isinf(e) ? 0.0 : std::exp(e - mx); z += e; }
        for (std::size_t j = 0; j < x.size(); ++j)
            for (std::size_t c = 0; c < v[j].size(); ++c) ctx[i][c] += s[j] / z * v[j][c];
    }
    return affine(ctx, w.output);
}

Mat add(const Mat& a, const Mat& b) {
    Mat out = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) out[i][j] += b[i][j];
    return out;
}

Mat brute_force_logits(const Mat& visual, const std::vector<int>& ids, const LMWeights& w) {
    Mat emb = to_mat(w.embedding.value());
    const std::size_t d = emb[0].size();
    Mat x = visual;
    for (std::size_t p = 0; p < ids.size(); ++p) {
        std::vector<double> row = emb[static_cast<std::size_t>(ids[p])];
        for (std::size_t i = 0; i < d; ++i) {
            const double angle = static_cast<double>(p) / std::pow(10000.0, static_cast<double>(i - i % 2) / static_cast<double>(d));
            row[i] += (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
        x.push_back(row);
    }
    const auto& b = w.blocks.at(0);
    x = add(x, masked_self_attention(norm(x, b.attn_norm), b.attn, visual.size()));
    Mat h = affine(norm(x, b.ffn_norm), b.ffn_in);
    for (auto& r : h)
        for (auto& e : r) e = 0.5 * e * (1.0 + std::erf(e / std::sqrt(2.0)));
    x = add(x, affine(h, b.ffn_out));
    Mat text(x.begin() + static_cast<std::ptrdiff_t>(visual.size()), x.end());
    text = norm(text, w.final_norm);
    auto bias = vec_of(w.output_bias);
    Mat logits(text.size(), std::vector<double>(emb.size()));
    for (std::size_t i = 0; i < text.size(); ++i)
        for (std::size_t t = 0; t < emb.size(); ++t) {
            double acc = bias[t];
            for (std::size_t c = 0; c < d; ++c) acc += text[i][c] * emb[t][c];
            logits[i][t] = acc;
        }
    return logits;
}

struct Fixture {
    LMConfig cfg;
    ParameterSet params;
    Var embedding;
    LMWeights weights;

    explicit Fixture(LMConfig c, std::uint64_t seed = 3) : cfg(c) {
        Rng rng(seed);
        embedding = params.add("embedding", ParamGroup::embedding, rng.normal_tensor({cfg.vocab, cfg.width}, 0.5));
        weights = make_lm(params, cfg, embedding, rng);
        // Move layer norm and bias away from their trivial initial values.
        for (auto& p : params)
            if (p.name().find("norm") != std::string::npos || p.name() == "lm.output_bias")
                for (auto& v : p.tensor().data()) v += rng.normal(0.0, 0.1);
    }
};

LMConfig small_config() {
    LMConfig c;
    c.layers = 2;
    c.heads = 2;
    c.width = 8;
    c.vocab = 12;
    c.ffn_width = 16;
    c.max_seq_len = 32;
    return c;
}

fusion::ConditionedVisualFeatures visual_tokens(std::size_t n, std::size_t width, std::uint64_t seed) {
    Rng rng(seed);
    return {Var::constant(rng.normal_tensor({n, width}, 1.0))};
}

} // namespace

TEST_CASE("decode_logits has one row per text token and vocab columns") {
    Fixture f(small_config());
    auto logits = decode_logits(visual_tokens(4, 8, 1), {{1, 5, 6, 7}}, f.weights, f.cfg);
    CHECK(logits.value().rows() == 4);
    CHECK(logits.value().cols() == 12);
    CHECK(logits.value().all_finite());
}

TEST_CASE("changing a text token leaves earlier logits bit-identical") {
    Fixture f(small_config());
    auto vis = visual_tokens(4, 8, 1);
    enc::TokenSequence seq{{1, 5, 6, 7, 8, 9}};
    Tensor base = decode_logits(vis, seq, f.weights, f.cfg).value();
    for (std::size_t j = 0; j < seq.ids.size(); ++j) {
        auto changed = seq;
        changed.ids[j] = (changed.ids[j] + 3) % 12;
        Tensor other = decode_logits(vis, changed, f.weights, f.cfg).value();
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t c = 0; c < 12; ++c) REQUIRE(other.at(i, c) == base.at(i, c));
        bool moved = false;
        for (std::size_t c = 0; c < 12; ++c) moved = moved || other.at(j, c) != base.at(j, c);
        CHECK(moved);
    }
}

TEST_CASE("visual tokens are visible from every text position") {
    Fixture f(small_config());
    enc::TokenSequence seq{{1, 5, 6}};
    Tensor a = decode_logits(visual_tokens(4, 8, 1), seq, f.weights, f.cfg).value();
    Tensor b = decode_logits(visual_tokens(4, 8, 2), seq, f.weights, f.cfg).value();
    for (std::size_t c = 0; c < 12; ++c) CHECK(a.at(0, c) != b.at(0, c));
}

TEST_CASE("empty visual prefix reduces to a text-only model") {
    Fixture f(small_config());
    enc::TokenSequence seq{{1, 4, 9}};
    Tensor none = decode_logits({}, seq, f.weights, f.cfg).value();
    Tensor empty = decode_logits({Var::constant(Tensor({0, 8}))}, seq, f.weights, f.cfg).value();
    CHECK(none == empty);
}

TEST_CASE("one layer one head matches a brute-force evaluation") {
    LMConfig c = small_config();
    c.layers = 1;
    c.heads = 1;
    Fixture f(c, 11);
    for (std::size_t prefix : {0u, 1u, 5u}) {
        Mat vis_m;
        fusion::ConditionedVisualFeatures vis;
        if (prefix > 0) {
            vis = visual_tokens(prefix, 8, 40 + prefix);
            vis_m = to_mat(vis.matrix.value());
        }
        std::vector<int> ids{1, 3, 10, 4, 2};
        Tensor got = decode_logits(vis, {ids}, f.weights, c).value();
        Mat want = brute_force_logits(vis_m, ids, f.weights);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t t = 0; t < c.vocab; ++t) CHECK(std::abs(got.at(i, t) - want[i][t]) < 1e-9);
    }
}

TEST_CASE("overlong input is a capacity error") {
    LMConfig c = small_config();
    c.max_seq_len = 6;
    Fixture f(c);
    CHECK_NOTHROW(decode_logits(visual_tokens(3, 8, 1), {{1, 2, 3}}, f.weights, c));
    CHECK_THROWS_AS(decode_logits(visual_tokens(4, 8, 1), {{1, 2, 3}}, f.weights, c), CapacityError);
}

TEST_CASE("visual width mismatch and bad configs are rejected") {
    Fixture f(small_config());
    CHECK_THROWS_AS(decode_logits(visual_tokens(2, 6, 1), {{1}}, f.weights, f.cfg), ShapeError);
    CHECK_THROWS_AS(decode_logits(visual_tokens(2, 8, 1), {{}}, f.weights, f.cfg), ShapeError);
    LMConfig c = small_config();
    c.vocab = 3;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = small_config();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    ParameterSet ps;
    Rng rng(0);
    auto emb = ps.add("e", ParamGroup::embedding, Tensor({5, 8}));
    CHECK_THROWS_AS(make_lm(ps, small_config(), emb, rng), ShapeError);
}

TEST_CASE("nll examples") {
    SUBCASE("uniform logits give ln V") {
        Var logits = Var::constant(Tensor({3, 7}));
        std::vector<unsigned char> mask{1, 1, 1};
        CHECK(nll_loss(logits, {{0, 3, 6}}, mask).item() == doctest::Approx(std::log(7.0)).epsilon(1e-14));
    }
    SUBCASE("large margin on target") {
        Tensor t({2, 4});
        t.at(0, 2) = 1000.0;
        t.at(1, 0) = 1000.0;
        std::vector<unsigned char> mask{1, 1};
        CHECK(nll_loss(Var::constant(t), {{2, 0}}, mask).item() < 1e-6);
    }
    SUBCASE("hand case") {
        Tensor t = Tensor::matrix(2, 2, {0.0, std::log(3.0), 0.0, 0.0});
        std::vector<unsigned char> mask{1, 1};
        const double want = (-std::log(0.75) - std::log(0.5)) / 2.0;
        const double got = nll_loss(Var::constant(t), {{1, 0}}, mask).item();
        CHECK(std::abs(got - want) < 1e-12);
        CHECK(std::abs(got - 0.490414) < 1e-6);
    }
    SUBCASE("all masked") {
        std::vector<unsigned char> mask{0, 0};
        CHECK_THROWS_AS(nll_loss(Var::constant(Tensor({2, 3})), {{0, 1}}, mask), DegenerateInputError);
    }
}

TEST_CASE("nll is invariant to shifting a logit row") {
    Rng rng(5);
    Tensor t = rng.normal_tensor({4, 6}, 2.0);
    std::vector<unsigned char> mask{1, 0, 1, 1};
    enc::TokenSequence tg{{1, 2, 5, 0}};
    const double base = nll_loss(Var::constant(t), tg, mask).item();
    for (int trial = 0; trial < 20; ++trial) {
        Tensor s = t;
        const std::size_t r = rng.index(4);
        const double c = rng.uniform(-50.0, 50.0);
        for (std::size_t j = 0; j < 6; ++j) s.at(r, j) += c;
        CHECK(nll_loss(Var::constant(s), tg, mask).item() == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("perturbing masked positions leaves nll bit-identical") {
    Rng rng(6);
    Tensor t = rng.normal_tensor({5, 6}, 1.0);
    std::vector<unsigned char> mask{0, 1, 0, 1, 0};
    enc::TokenSequence tg{{1, 2, 3, 4, 5}};
    const double base = nll_loss(Var::constant(t), tg, mask).item();
    for (std::size_t r : {0u, 2u, 4u}) {
        Tensor s = t;
        for (std::size_t j = 0; j < 6; ++j) s.at(r, j) = rng.normal(0.0, 10.0);
        CHECK(nll_loss(Var::constant(s), tg, mask).item() == base);
    }
}

TEST_CASE("one small gradient step lowers the nll of a fixed sample") {
    Fixture f(small_config());
    auto vis = visual_tokens(4, 8, 9);
    enc::TokenSequence input{{1, 5, 6, 7}};
    enc::TokenSequence target{{5, 6, 7, 2}};
    std::vector<unsigned char> mask{0, 0, 1, 1};
    auto loss = [&] { return nll_loss(decode_logits(vis, input, f.weights, f.cfg), target, mask); };
    f.params.zero_grad();
    Var l0 = loss();
    l0.backward();
    for (auto& p : f.params) {
        auto g = p.tensor().grad();
        auto v = p.tensor().data();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= 1e-3 * g[i];
    }
    CHECK(loss().item() < l0.item());
}

TEST_CASE("lm gradients agree with finite differences") {
    LMConfig c = small_config();
    c.width = 4;
    c.vocab = 6;
    c.ffn_width = 6;
    Fixture f(c, 21);
    auto vis = visual_tokens(2, 4, 9);
    std::vector<unsigned char> mask{0, 1, 1};
    auto result = grad_check(
        [&] { return nll_loss(decode_logits(vis, {{1, 3, 4}}, f.weights, c), {{3, 4, 2}}, mask); }, f.params);
    CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("greedy decode stops at eos and respects the length cap") {
    Fixture f(small_config());
    auto vis = visual_tokens(2, 8, 1);
    auto out = greedy_decode(vis, {{1, 5}}, f.weights, f.cfg, 4);
    CHECK(out.size() <= 4);
    for (int id : out) CHECK(id != enc::Vocabulary::eos);
    // Force eos to win everywhere.
    f.weights.output_bias.value()[enc::Vocabulary::eos] = 1e6;
    CHECK(greedy_decode(vis, {{1, 5}}, f.weights, f.cfg, 4).empty());
}
