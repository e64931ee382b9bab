#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace d2c::metrics {

using Tokens = std::vector<std::string>;

// Lowercase, ASCII punctuation removed, whitespace runs collapsed to one
// space, no leading or trailing space.
std::string normalize(std::string_view text);
// Whitespace split of the normalized text.
Tokens tokenize(std::string_view text);

// Size of the multiset intersection of the two token lists.
std::size_t clipped_overlap(const Tokens& candidate, const Tokens& reference);

// Clipped unigram precision times the brevity penalty min(1, exp(1 - r/c)).
double bleu1(const Tokens& candidate, const Tokens& reference);

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

RougeScore rouge1_scores(const Tokens& candidate, const Tokens& reference);
// F1 of the clipped unigram overlap.
double rouge1(const Tokens& candidate, const Tokens& reference);

enum class QuestionType { closed, open };

std::string to_string(QuestionType type);
QuestionType parse_question_type(std::string_view text);

struct EvalRecord {
    std::string id;
    QuestionType type = QuestionType::open;
    std::string candidate;
    std::string reference;
};

// Fraction of records of `type` whose normalized candidate equals the
// normalized reference.
double accuracy(const std::vector<EvalRecord>& records, QuestionType type);

struct MetricSummary {
    std::string metric;
    double value = 0.0;
    std::size_t count = 0;
};

// closed_acc and open_acc (when records of that type exist), then bleu1 and
// rouge1 averaged over every record.
std::vector<MetricSummary> summarize(const std::vector<EvalRecord>& records);

// JSON Lines with fields id, type, candidate, reference.
std::vector<EvalRecord> read_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
// CSV with header metric,value,count.
void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricSummary>& summary);

} // namespace d2c::metrics
