#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d2c/encoders/image_source.hpp"
#include "d2c/encoders/text_encoder.hpp"
#include "d2c/encoders/vocabulary.hpp"
#include "d2c/mfe/multiscale.hpp"

namespace d2c::train {

enum class QuestionType { closed, open };

std::string to_string(QuestionType type);
QuestionType parse_question_type(const std::string& text);

// Block-lookup task. Every finest block of the map carries a location code in
// the first half of the channels and a class prototype in the second half.
// The question names one block; the answer is that block's class (open) or
// whether it shows a named class (closed).
struct SyntheticConfig {
    std::size_t side = 8;
    std::size_t width = 16;
    std::size_t scales = 3;
    std::size_t classes = 8;
    std::size_t caption_pool = 30;
    std::size_t vocab_size = 64;
    double noise = 0.1;
    double closed_fraction = 0.0;
    // Seeds the location codes and class prototypes, shared by every split.
    std::uint64_t codebook_seed = 7;

    void validate() const;
    std::size_t finest_blocks() const;
    std::size_t location_channels() const { return width / 2; }
};

struct SyntheticSample {
    std::size_t id = 0;
    QuestionType type = QuestionType::open;
    enc::FeatureMap map;
    enc::TokenSequence question;
    // Answer tokens followed by eos.
    enc::TokenSequence answer;
    std::vector<enc::TokenSequence> captions;
    // The finest-scale block the question asks about.
    mfe::BlockCoord planted;
    // Class of every finest block, row-major.
    std::vector<std::size_t> block_classes;
};

std::string block_token(std::size_t block);
std::string class_token(std::size_t cls);

// Reserved tokens, task words, block and class tokens, then filler words up
// to `vocab_size`.
enc::Vocabulary synthetic_vocabulary(const SyntheticConfig& cfg);

struct Codebook {
    // finest_blocks × location_channels
    Tensor locations;
    // classes × (width − location_channels)
    Tensor prototypes;
};

Codebook make_codebook(const SyntheticConfig& cfg);

std::vector<SyntheticSample> make_synthetic_dataset(std::size_t n, const SyntheticConfig& cfg,
                                                    std::uint64_t seed);

// The same sample with an open question about another finest block; the
// answer follows that block's class.
SyntheticSample ask_about(const SyntheticSample& sample, std::size_t block, const SyntheticConfig& cfg);

// Input/target/mask triple for next-token training on question + answer.
// Only positions that predict answer tokens (eos included) are unmasked.
struct LmExample {
    enc::TokenSequence inputs;
    enc::TokenSequence targets;
    std::vector<unsigned char> mask;
};

LmExample lm_example(const SyntheticSample& sample);

} // namespace d2c::train
