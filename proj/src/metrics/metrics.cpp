#include "d2c/metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "d2c/numcore/errors.hpp"

namespace d2c::metrics {
namespace {

void require_reference(const Tokens& reference) {
    if (reference.empty()) throw DegenerateInputError("metric needs a nonempty reference");
}

std::string field_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
        std::string out;
        for (const auto& t : v) {
            if (!out.empty()) out += ' ';
            out += t.get<std::string>();
        }
        return out;
    }
    throw FormatError("candidate/reference must be a string or a list of strings");
}

} // namespace

std::string normalize(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (std::ispunct(c)) continue;
        if (pending_space) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

Tokens tokenize(std::string_view text) {
    Tokens out;
    std::istringstream in(normalize(text));
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

std::size_t clipped_overlap(const Tokens& candidate, const Tokens& reference) {
    std::map<std::string, std::size_t> ref_counts;
    for (const auto& t : reference) ++ref_counts[t];
    std::size_t overlap = 0;
    for (const auto& t : candidate) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    return overlap;
}

double bleu1(const Tokens& candidate, const Tokens& reference) {
    require_reference(reference);
    if (candidate.empty()) return 0.0;
    const double c = static_cast<double>(candidate.size());
    const double r = static_cast<double>(reference.size());
    const double precision = static_cast<double>(clipped_overlap(candidate, reference)) / c;
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return precision * bp;
}

RougeScore rouge1_scores(const Tokens& candidate, const Tokens& reference) {
    require_reference(reference);
    RougeScore s;
    const std::size_t overlap = clipped_overlap(candidate, reference);
    if (overlap == 0) return s;
    s.precision = static_cast<double>(overlap) / static_cast<double>(candidate.size());
    s.recall = static_cast<double>(overlap) / static_cast<double>(reference.size());
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

double rouge1(const Tokens& candidate, const Tokens& reference) { return rouge1_scores(candidate, reference).f1; }

std::string to_string(QuestionType type) { return type == QuestionType::open ? "open" : "closed"; }

QuestionType parse_question_type(std::string_view text) {
    if (text == "open") return QuestionType::open;
    if (text == "closed") return QuestionType::closed;
    throw FormatError("unknown question type '" + std::string(text) + "'");
}

double accuracy(const std::vector<EvalRecord>& records, QuestionType type) {
    std::size_t total = 0, correct = 0;
    for (const auto& r : records) {
        if (r.type != type) continue;
        ++total;
        if (normalize(r.candidate) == normalize(r.reference)) ++correct;
    }
    if (total == 0) throw DegenerateInputError("no " + to_string(type) + " records to score");
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<MetricSummary> summarize(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw DegenerateInputError("no records to score");
    std::vector<MetricSummary> out;
    for (auto type : {QuestionType::closed, QuestionType::open}) {
        const auto n = static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [&](const EvalRecord& r) { return r.type == type; }));
        if (n > 0) out.push_back({to_string(type) + "_acc", accuracy(records, type), n});
    }
    double b = 0.0, r = 0.0;
    for (const auto& rec : records) {
        const auto cand = tokenize(rec.candidate);
        const auto ref = tokenize(rec.reference);
        b += bleu1(cand, ref);
        r += rouge1(cand, ref);
    }
    const double n = static_cast<double>(records.size());
    out.push_back({"bleu1", b / n, records.size()});
    out.push_back({"rouge1", r / n, records.size()});
    return out;
}

std::vector<EvalRecord> read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<EvalRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            EvalRecord r;
            r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            r.type = parse_question_type(j.at("type").get<std::string>());
            r.candidate = field_text(j.at("candidate"));
            r.reference = field_text(j.at("reference"));
            if (tokenize(r.reference).empty()) throw FormatError("empty reference");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : records) {
        nlohmann::json j{{"id", r.id}, {"type", to_string(r.type)}, {"candidate", r.candidate}, {"reference", r.reference}};
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<MetricSummary>& summary) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "metric,value,count\n";
    char buf[160];
    for (const auto& m : summary) {
        std::snprintf(buf, sizeof buf, "%s,%.17g,%zu\n", m.metric.c_str(), m.value, m.count);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace d2c::metrics
