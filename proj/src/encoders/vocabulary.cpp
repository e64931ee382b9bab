#include "d2c/encoders/vocabulary.hpp"

#include <fstream>
#include <sstream>

#include "d2c/numcore/errors.hpp"

namespace d2c::enc {
namespace {
const std::vector<std::string> kReserved{"<pad>", "<bos>", "<eos>"};
} // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.size() < 4) throw ParameterError("vocabulary needs at least 4 tokens");
    for (std::size_t i = 0; i < kReserved.size(); ++i) {
        if (tokens_[i] != kReserved[i]) {
            throw ParameterError("vocabulary id " + std::to_string(i) + " must be " + kReserved[i]);
        }
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const auto& t = tokens_[i];
        if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
            throw ParameterError("vocabulary token at id " + std::to_string(i) +
                                 " is empty or contains whitespace");
        }
        if (!index_.emplace(t, static_cast<int>(i)).second) {
            throw ParameterError("duplicate vocabulary token '" + t + "'");
        }
    }
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
    std::vector<std::string> tokens = kReserved;
    tokens.insert(tokens.end(), words.begin(), words.end());
    return Vocabulary(std::move(tokens));
}

int Vocabulary::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) throw LookupError("token '" + std::string(token) + "' not in vocabulary");
    return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
    return index_.contains(std::string(token));
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw LookupError("token id " + std::to_string(id) + " outside vocabulary");
    }
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    std::istringstream in{std::string(text)};
    std::vector<int> ids;
    std::string word;
    while (in >> word) ids.push_back(id(word));
    return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int i : ids) {
        if (i == pad || i == bos || i == eos) continue;
        if (!out.empty()) out += ' ';
        out += token(i);
    }
    return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write vocabulary " + path.string());
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
}

} // namespace d2c::enc
