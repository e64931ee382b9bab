#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"

#include "d2c/metrics/metrics.hpp"
#include "d2c/numcore/errors.hpp"

using namespace d2c;
using namespace d2c::metrics;
namespace fs = std::filesystem;

namespace {

Tokens t(std::string_view s) { return tokenize(s); }

// Multiset intersection through sorted ranges.
std::size_t sorted_intersection(Tokens a, Tokens b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    Tokens common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return common.size();
}

Tokens random_tokens(std::mt19937& gen, std::size_t min_len) {
    static const Tokens pool{"a", "b", "c", "d", "e"};
    std::uniform_int_distribution<std::size_t> len(min_len, 7), pick(0, pool.size() - 1);
    Tokens out(len(gen));
    for (auto& x : out) x = pool[pick(gen)];
    return out;
}

} // namespace

TEST_CASE("normalization") {
    CHECK(normalize("  Yes. ") == "yes");
    CHECK(normalize("The\tCat,  sat!\n") == "the cat sat");
    CHECK(normalize("...") == "");
    CHECK(t("a  b   c") == Tokens{"a", "b", "c"});
}

TEST_CASE("bleu1 examples") {
    CHECK(bleu1(t("the cat sat"), t("the cat sat")) == 1.0);
    CHECK(std::abs(bleu1(t("the cat"), t("the cat sat")) - std::exp(-0.5)) < 1e-15);
    CHECK(std::abs(bleu1(t("the cat"), t("the cat sat")) - 0.606531) < 1e-6);
    CHECK(bleu1(t("dog runs"), t("the cat sat")) == 0.0);
    CHECK(bleu1({}, t("the cat")) == 0.0);
    CHECK_THROWS_AS(bleu1(t("x"), {}), DegenerateInputError);
    // Longer candidates carry no brevity penalty.
    CHECK(bleu1(t("the cat sat down"), t("the cat sat")) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("rouge1 examples") {
    CHECK(rouge1(t("the cat sat"), t("the cat sat")) == 1.0);
    auto s = rouge1_scores(t("the cat"), t("the cat sat"));
    CHECK(s.precision == 1.0);
    CHECK(std::abs(s.recall - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(s.f1 - 0.8) < 1e-15);
    CHECK(rouge1(t("dog runs"), t("the cat sat")) == 0.0);
    CHECK(rouge1({}, t("the")) == 0.0);
}

TEST_CASE("clipping matches a multiset intersection") {
    CHECK(clipped_overlap(t("the the the"), t("the cat")) == 1);
    CHECK(bleu1(t("the the the"), t("the cat")) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    std::mt19937 gen(3);
    for (int i = 0; i < 500; ++i) {
        auto a = random_tokens(gen, 0);
        auto b = random_tokens(gen, 1);
        CHECK(clipped_overlap(a, b) == sorted_intersection(a, b));
    }
}

TEST_CASE("metrics are bounded, reflexive and order-invariant") {
    std::mt19937 gen(4);
    for (int i = 0; i < 300; ++i) {
        auto a = random_tokens(gen, 1);
        auto b = random_tokens(gen, 1);
        const double bl = bleu1(a, b), rg = rouge1(a, b);
        CHECK(bl >= 0.0);
        CHECK(bl <= 1.0);
        CHECK(rg >= 0.0);
        CHECK(rg <= 1.0);
        CHECK(bleu1(a, a) == 1.0);
        CHECK(rouge1(a, a) == 1.0);
        auto p = a;
        std::shuffle(p.begin(), p.end(), gen);
        CHECK(bleu1(p, b) == bl);
        auto s1 = rouge1_scores(a, b), s2 = rouge1_scores(p, b);
        CHECK(s1.precision == s2.precision);
        CHECK(s1.recall == s2.recall);
    }
}

TEST_CASE("accuracy examples") {
    std::vector<EvalRecord> all{{"1", QuestionType::closed, "yes", "yes"}, {"2", QuestionType::closed, "no", "no"}};
    CHECK(accuracy(all, QuestionType::closed) == 1.0);
    std::vector<EvalRecord> norm{{"1", QuestionType::closed, "Yes.", "yes"}};
    CHECK(accuracy(norm, QuestionType::closed) == 1.0);
    std::vector<EvalRecord> three{{"1", QuestionType::open, "c1", "c1"},
                                  {"2", QuestionType::open, "c2", "c3"},
                                  {"3", QuestionType::open, "C3!", "c3"}};
    CHECK(accuracy(three, QuestionType::open) == 2.0 / 3.0);
    CHECK_THROWS_AS(accuracy(three, QuestionType::closed), DegenerateInputError);
}

TEST_CASE("summary lists accuracies per type and mean overlap scores") {
    std::vector<EvalRecord> recs{{"1", QuestionType::closed, "yes", "no"},
                                 {"2", QuestionType::open, "the cat", "the cat sat"},
                                 {"3", QuestionType::open, "c4", "c4"}};
    auto s = summarize(recs);
    REQUIRE(s.size() == 4);
    CHECK(s[0].metric == "closed_acc");
    CHECK(s[0].value == 0.0);
    CHECK(s[0].count == 1);
    CHECK(s[1].metric == "open_acc");
    CHECK(s[1].value == 0.5);
    CHECK(s[2].metric == "bleu1");
    CHECK(s[2].value == doctest::Approx((0.0 + std::exp(-0.5) + 1.0) / 3.0).epsilon(1e-15));
    CHECK(s[3].metric == "rouge1");
    CHECK(s[3].value == doctest::Approx((0.0 + 0.8 + 1.0) / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(summarize({}), DegenerateInputError);
}

TEST_CASE("prediction files round trip and reject bad input") {
    const auto dir = fs::temp_directory_path() / "d2c_metrics";
    fs::create_directories(dir);
    std::vector<EvalRecord> recs{{"a", QuestionType::open, "c1", "c1"}, {"b", QuestionType::closed, "", "yes"}};
    write_predictions(dir / "p.jsonl", recs);
    auto back = read_predictions(dir / "p.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[1].id == "b");
    CHECK(back[1].type == QuestionType::closed);
    CHECK(back[1].candidate.empty());
    CHECK(back[0].reference == "c1");

    {
        std::ofstream out(dir / "list.jsonl");
        out << R"({"id": 7, "type": "open", "candidate": ["the", "cat"], "reference": ["the", "cat", "sat"]})" << '\n';
    }
    auto l = read_predictions(dir / "list.jsonl");
    CHECK(l[0].id == "7");
    CHECK(rouge1(t(l[0].candidate), t(l[0].reference)) == doctest::Approx(0.8));

    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"id": "x", "type": "maybe", "candidate": "a", "reference": "a"})" << '\n';
    }
    CHECK_THROWS_AS(read_predictions(dir / "bad.jsonl"), FormatError);
    {
        std::ofstream out(dir / "broken.jsonl");
        out << "{not json\n";
    }
    CHECK_THROWS_AS(read_predictions(dir / "broken.jsonl"), FormatError);
    CHECK_THROWS_AS(read_predictions(dir / "absent.jsonl"), IoError);

    write_summary_csv(dir / "s.csv", summarize(recs));
    std::ifstream in(dir / "s.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "metric,value,count");
    fs::remove_all(dir);
}
