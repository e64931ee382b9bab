#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "d2c/encoders/image_source.hpp"
#include "d2c/encoders/text_encoder.hpp"
#include "d2c/encoders/vocabulary.hpp"
#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"
#include "d2c/numcore/tensor_io.hpp"

using namespace d2c;
using namespace d2c::enc;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "d2c_test_encoders";
    std::filesystem::create_directories(dir);
    return dir / name;
}

Mlp one_layer(ParameterSet& ps, Tensor w, Tensor b) {
    Mlp mlp;
    mlp.layers.push_back({ps.add("mlp.w", ParamGroup::projector, std::move(w)),
                          ps.add("mlp.b", ParamGroup::projector, std::move(b))});
    return mlp;
}

} // namespace

TEST_CASE("vocabulary reserves pad, bos and eos") {
    auto v = Vocabulary::from_words({"yes", "no"});
    CHECK(v.size() == 5);
    CHECK(v.id("<pad>") == Vocabulary::pad);
    CHECK(v.id("<bos>") == Vocabulary::bos);
    CHECK(v.id("<eos>") == Vocabulary::eos);
    CHECK(v.encode("yes no yes") == std::vector<int>{3, 4, 3});
    CHECK(v.decode({1, 3, 4, 2}) == "yes no");
    CHECK_THROWS_AS(v.encode("maybe"), LookupError);
    CHECK_THROWS_AS(Vocabulary::from_words({"a", "a"}), ParameterError);
    CHECK_THROWS_AS(Vocabulary::from_words({}), ParameterError);
    CHECK_THROWS_AS(Vocabulary({"a", "b", "c", "d"}), ParameterError);
}

TEST_CASE("vocabulary file is one token per line") {
    auto v = Vocabulary::from_words({"alpha", "beta"});
    auto path = temp_path("vocab.txt");
    v.save(path);
    CHECK(Vocabulary::load(path) == v);
}

TEST_CASE("identity MLP returns embedding rows") {
    Rng rng(1);
    ParameterSet ps;
    Var table = ps.add("embed", ParamGroup::embedding, rng.normal_tensor({6, 3}, 1.0));
    Tensor eye({3, 3});
    for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
    Mlp mlp = one_layer(ps, eye, Tensor({3}));
    TokenSequence seq{{4, 0, 4, 5}};
    auto out = encode_text(seq, table, mlp);
    REQUIRE(out.length() == 4);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(out.matrix.value().at(r, c) == table.value().at(static_cast<std::size_t>(seq.ids[r]), c));
}

TEST_CASE("hand-set one-layer MLP matches the affine map") {
    ParameterSet ps;
    Var table = ps.add("embed", ParamGroup::embedding, Tensor::matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
    Mlp mlp = one_layer(ps, Tensor::matrix(2, 2, {0.5, -1.0, 2.0, 0.0}), Tensor::vector({0.1, 0.2}));
    auto out = encode_text({{3, 1}}, table, mlp).matrix.value();
    // [7, 8]·W + b = [19.6, -6.8]; [3, 4]·W + b = [9.6, -2.8]
    CHECK(out.at(0, 0) == doctest::Approx(19.6).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(-6.8).epsilon(1e-15));
    CHECK(out.at(1, 0) == doctest::Approx(9.6).epsilon(1e-15));
    CHECK(out.at(1, 1) == doctest::Approx(-2.8).epsilon(1e-15));
}

TEST_CASE("encode_text errors") {
    Rng rng(2);
    ParameterSet ps;
    Var table = ps.add("embed", ParamGroup::embedding, rng.normal_tensor({4, 2}, 1.0));
    Mlp mlp = make_mlp(ps, "mlp", ParamGroup::projector, 2, 4, 2, rng);
    CHECK_THROWS_AS(encode_text({{}}, table, mlp), ShapeError);
    CHECK_THROWS_AS(encode_text({{1, 4}}, table, mlp), LookupError);
    CHECK_THROWS_AS(make_mlp(ps, "bad", ParamGroup::projector, 2, 4, 0, rng), ParameterError);
}

TEST_CASE("encode_text is equivariant to position permutations") {
    Rng rng(3);
    ParameterSet ps;
    Var table = ps.add("embed", ParamGroup::embedding, rng.normal_tensor({10, 4}, 1.0));
    Mlp mlp = make_mlp(ps, "mlp", ParamGroup::projector, 4, 8, 2, rng);
    auto a = encode_text({{5, 1, 7, 2}}, table, mlp).matrix.value();
    auto b = encode_text({{7, 2, 5, 1}}, table, mlp).matrix.value();
    const std::size_t perm[] = {2, 3, 0, 1};
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c) CHECK(b.at(r, c) == a.at(perm[r], c));
}

TEST_CASE("embedding gradient touches exactly the looked-up rows") {
    Rng rng(4);
    ParameterSet ps;
    Var table = ps.add("embed", ParamGroup::embedding, rng.normal_tensor({8, 4}, 1.0));
    Mlp mlp = make_mlp(ps, "mlp", ParamGroup::projector, 4, 6, 2, rng);
    TokenSequence seq{{6, 3, 6}};
    auto out = encode_text(seq, table, mlp);
    ops::weighted_sum(out.matrix, rng.normal_tensor({3, 4}, 1.0)).backward();
    auto g = table.grad();
    for (std::size_t r = 0; r < 8; ++r) {
        bool nonzero = false;
        for (std::size_t c = 0; c < 4; ++c) nonzero = nonzero || g[r * 4 + c] != 0.0;
        CHECK(nonzero == (r == 3 || r == 6));
    }
}

TEST_CASE("synthetic images are seed deterministic") {
    auto a = provide_image(SyntheticImageSpec{32, 8, 7});
    auto b = provide_image(SyntheticImageSpec{32, 8, 7});
    auto c = provide_image(SyntheticImageSpec{32, 8, 8});
    CHECK(a.side() == 32);
    CHECK(a.width() == 8);
    CHECK(a.grid() == b.grid());
    CHECK_FALSE(a.grid() == c.grid());
}

TEST_CASE("feature map files") {
    auto map = provide_image(SyntheticImageSpec{4, 3, 9});
    auto path = temp_path("map.d2ct");
    save_tensor(path, map.grid());
    CHECK(provide_image(path).grid() == map.grid());

    save_tensor(path, Tensor({4, 4}));
    CHECK_THROWS_AS(provide_image(path), ShapeError);
    save_tensor(path, Tensor({4, 3, 2}));
    CHECK_THROWS_AS(provide_image(path), ShapeError);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "garbage";
    }
    CHECK_THROWS_AS(provide_image(path), FormatError);
}

TEST_CASE("flattened map is patch-major") {
    auto map = provide_image(SyntheticImageSpec{3, 2, 1});
    Tensor flat = map.flattened();
    CHECK(flat.rows() == 9);
    CHECK(flat.at(5, 1) == map.at(1, 2, 1));
}
