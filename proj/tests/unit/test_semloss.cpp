#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/gradcheck.hpp"
#include "d2c/numcore/ops.hpp"
#include "d2c/numcore/rng.hpp"
#include "d2c/numcore/tensor_io.hpp"
#include "d2c/semloss/semantic_loss.hpp"

using namespace d2c;
using namespace d2c::sem;

namespace {

Var vec(std::vector<double> v) { return Var::constant(Tensor::vector(std::move(v))); }

SemanticDistribution dist(std::vector<double> p) { return {vec(std::move(p))}; }

TextQueue random_queue(Rng& rng, std::size_t k, std::size_t d, double tau) {
    return TextQueue(rng.normal_tensor({k, d}, 1.0), tau);
}

} // namespace

TEST_CASE("pool_semantic examples") {
    CHECK(pool_semantic(Var::constant(Tensor::matrix(1, 3, {1.0, -2.0, 0.5}))).value() ==
          Tensor::vector({1.0, -2.0, 0.5}));
    CHECK(pool_semantic(Var::constant(Tensor::matrix(2, 2, {1.5, -3.0, -1.5, 3.0}))).value() ==
          Tensor::vector({0.0, 0.0}));
    CHECK(pool_semantic(Var::constant(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0}))).value() ==
          Tensor::vector({0.5, 0.5}));
    CHECK_THROWS_AS(pool_semantic(Var::constant(Tensor({0, 3}))), ShapeError);
}

TEST_CASE("queue validation") {
    CHECK_THROWS_AS(TextQueue(Tensor::matrix(1, 2, {1.0, 0.0}), 0.07), ShapeError);
    CHECK_THROWS_AS(TextQueue(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 0.0}), 0.07), DegenerateInputError);
    CHECK_THROWS_AS(TextQueue(Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0}), 0.0), ParameterError);
    CHECK(kDefaultQueueSize == 30);
}

TEST_CASE("queue fixture file round trip") {
    Rng rng(1);
    auto q = random_queue(rng, 30, 8, 0.07);
    auto path = std::filesystem::temp_directory_path() / "d2c_queue.d2ct";
    q.save(path);
    auto back = TextQueue::load(path, 0.07);
    CHECK(back.entries() == q.entries());
    CHECK(back.size() == 30);
}

TEST_CASE("semantic distribution examples") {
    Rng rng(2);
    auto q = random_queue(rng, kDefaultQueueSize, 8, kDefaultTau);
    auto p = semantic_distribution(vec({1, 2, 3, 4, 5, 6, 7, 8}), q);
    CHECK(p.size() == 30);
    double s = 0.0;
    for (double v : p.probs.value().data()) {
        CHECK(v > 0.0);
        s += v;
    }
    CHECK(std::abs(s - 1.0) < 1e-9);

    // Entry 0 equals the anchor; the rest are orthogonal to it.
    Tensor entries({30, 31});
    for (std::size_t i = 0; i < 30; ++i) entries.at(i, i + 1) = 1.0;
    for (std::size_t c = 0; c < 31; ++c) entries.at(0, c) = 0.0;
    entries.at(0, 0) = 2.0;
    Tensor anchor({31});
    anchor[0] = 2.0;
    auto sharp = semantic_distribution(Var::constant(anchor), TextQueue(entries, 0.01));
    // softmax([1, 0, ..., 0] / 0.01): p0 = 1 / (1 + 29 e^-100)
    CHECK(sharp.probs.value()[0] > 0.999);

    auto flat = semantic_distribution(vec({1, 2, 3, 4, 5, 6, 7, 8}), TextQueue(q.entries(), 1e9));
    for (double v : flat.probs.value().data()) CHECK(std::abs(v - 1.0 / 30.0) < 1e-9);

    CHECK_THROWS_AS(semantic_distribution(Var::constant(Tensor({8})), q), DegenerateInputError);
    CHECK_THROWS_AS(semantic_distribution(vec({1, 2}), q), ShapeError);
}

TEST_CASE("semantic loss examples") {
    Rng rng(3);
    auto q = random_queue(rng, 30, 8, kDefaultTau);
    Tensor a = rng.normal_tensor({4, 8}, 1.0);
    Var pooled_v = pool_semantic(Var::constant(a));
    Var pooled_t = pool_semantic(Var::constant(a));
    CHECK(semantic_loss(semantic_distribution(pooled_v, q), semantic_distribution(pooled_t, q)).item() == 0.0);

    CHECK(semantic_loss(dist({0.5, 0.5}), dist({0.25, 0.75})).item() == doctest::Approx(0.143841).epsilon(1e-6));
    CHECK_THROWS_AS(semantic_loss(dist({0.5, 0.5}), dist({0.2, 0.3, 0.5})), ShapeError);
}

TEST_CASE("total loss examples") {
    CHECK(total_loss(0.7, 2.0, 0.0) == 2.0);
    CHECK(total_loss(0.5, 2.0, 1.0) == 2.5);
    CHECK(total_loss(0.25, 1.0, 2.0) == 1.5);
    CHECK_THROWS_AS(total_loss(0.25, 1.0, -1.0), ParameterError);
    CHECK(total_loss(vec({0.5}), vec({2.0}), 1.0).item() == 2.5);
}

TEST_CASE("lambda = 0 removes the semantic gradient") {
    ParameterSet ps;
    Var s = ps.add("s", ParamGroup::gate, Tensor::scalar(0.4));
    Var n = ps.add("n", ParamGroup::lm, Tensor::scalar(1.0));
    total_loss(ops::mul(s, s), ops::mul(n, n), 0.0).backward();
    CHECK(s.grad()[0] == 0.0);
    CHECK(n.grad()[0] == 2.0);
}

TEST_CASE("semantic distribution is invariant to anchor scale") {
    Rng rng(4);
    auto q = random_queue(rng, 30, 6, kDefaultTau);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor a = rng.normal_tensor({6}, 1.0);
        Tensor b = a;
        const double c = rng.uniform(0.01, 100.0);
        for (double& v : b.data()) v *= c;
        auto pa = semantic_distribution(Var::constant(a), q).probs.value();
        auto pb = semantic_distribution(Var::constant(b), q).probs.value();
        for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(pa[i] - pb[i]) < 1e-12);
    }
}

TEST_CASE("queue permutation permutes probabilities and preserves the loss") {
    Rng rng(5);
    auto q = random_queue(rng, 12, 6, 0.2);
    std::vector<std::size_t> perm(12);
    for (std::size_t i = 0; i < 12; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Tensor shuffled({12, 6});
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t c = 0; c < 6; ++c) shuffled.at(i, c) = q.entries().at(perm[i], c);
    TextQueue qp(shuffled, 0.2);
    Var av = Var::constant(rng.normal_tensor({6}, 1.0));
    Var at = Var::constant(rng.normal_tensor({6}, 1.0));
    auto pv = semantic_distribution(av, q);
    auto pvp = semantic_distribution(av, qp);
    for (std::size_t i = 0; i < 12; ++i)
        CHECK(std::abs(pvp.probs.value()[i] - pv.probs.value()[perm[i]]) < 1e-15);
    const double l = semantic_loss(pv, semantic_distribution(at, q)).item();
    const double lp = semantic_loss(pvp, semantic_distribution(at, qp)).item();
    CHECK(std::abs(l - lp) < 1e-12);
}

TEST_CASE("semantic loss is nonnegative on random draws") {
    Rng rng(6);
    for (int trial = 0; trial < 300; ++trial) {
        auto q = random_queue(rng, 2 + rng.index(40), 8, rng.uniform(0.02, 2.0));
        Var av = Var::constant(rng.normal_tensor({8}, 1.0));
        Var at = Var::constant(rng.normal_tensor({8}, 1.0));
        CHECK(semantic_loss(semantic_distribution(av, q), semantic_distribution(at, q)).item() >= 0.0);
    }
}

TEST_CASE("semantic loss gradient through cosine, softmax and KL") {
    Rng rng(7);
    auto q = random_queue(rng, 30, 8, kDefaultTau);
    ParameterSet ps;
    Var fv = ps.add("fused", ParamGroup::gate, rng.normal_tensor({5, 8}, 1.0));
    Var ft = ps.add("text", ParamGroup::projector, rng.normal_tensor({3, 8}, 1.0));
    auto f = [&] {
        return semantic_loss(semantic_distribution(pool_semantic(fv), q),
                             semantic_distribution(pool_semantic(ft), q));
    };
    auto r = grad_check(f, ps);
    INFO(r.worst.param << "[" << r.worst.index << "] " << r.worst.analytic << " vs " << r.worst.numeric);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("gradient descent on the fused anchor drives the loss to zero") {
    Rng rng(8);
    auto q = random_queue(rng, 30, 8, kDefaultTau);
    Var text_anchor = Var::constant(rng.normal_tensor({8}, 1.0));
    auto pt = semantic_distribution(text_anchor, q);
    ParameterSet ps;
    Var anchor = ps.add("anchor", ParamGroup::gate, rng.normal_tensor({8}, 1.0));
    double loss = 0.0;
    int steps = 0;
    for (; steps < 500; ++steps) {
        ps.zero_grad();
        Var l = semantic_loss(semantic_distribution(anchor, q), pt);
        loss = l.item();
        if (loss < 1e-3) break;
        l.backward();
        auto g = anchor.grad();
        for (std::size_t i = 0; i < 8; ++i) anchor.value()[i] -= 1.0 * g[i];
    }
    INFO("steps " << steps << " loss " << loss);
    CHECK(loss < 1e-3);
}

TEST_CASE("build_queue pools encoded captions") {
    Rng rng(9);
    ParameterSet ps;
    Var table = ps.add("embed", ParamGroup::embedding, rng.normal_tensor({10, 4}, 1.0));
    auto mlp = enc::make_mlp(ps, "mlp", ParamGroup::projector, 4, 8, 2, rng);
    std::vector<enc::TokenSequence> caps{{{3, 4}}, {{5}}, {{6, 7, 8}}};
    auto q = build_queue(caps, table, mlp, 0.5);
    CHECK(q.size() == 3);
    auto direct = pool_semantic(enc::encode_text(caps[2], table, mlp).matrix).value();
    for (std::size_t c = 0; c < 4; ++c) CHECK(q.entries().at(2, c) == direct[c]);
}
