#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace d2c::enc {

// Ordered token list; the line number of a token in a vocabulary file is
// its id. Ids 0..2 are always <pad>, <bos>, <eos>.
class Vocabulary {
public:
    static constexpr int pad = 0;
    static constexpr int bos = 1;
    static constexpr int eos = 2;

    explicit Vocabulary(std::vector<std::string> tokens);
    // Reserved tokens followed by `words`.
    static Vocabulary from_words(const std::vector<std::string>& words);

    std::size_t size() const noexcept { return tokens_.size(); }
    int id(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(int id) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    // Whitespace-separated tokens to ids; unknown tokens raise LookupError.
    std::vector<int> encode(std::string_view text) const;
    // Space-joined tokens, skipping reserved ids.
    std::string decode(const std::vector<int>& ids) const;

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

} // namespace d2c::enc
