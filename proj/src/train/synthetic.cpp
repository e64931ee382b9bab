#include "d2c/train/synthetic.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/rng.hpp"

namespace d2c::train {
namespace {

const std::vector<std::string> kTaskWords{"what", "is", "shows", "yes", "no"};

int tok(const enc::Vocabulary& v, const std::string& word) { return v.id(word); }

enc::TokenSequence open_question(const enc::Vocabulary& v, std::size_t block) {
    return {{enc::Vocabulary::bos, tok(v, "what"), tok(v, block_token(block))}};
}

} // namespace

std::string to_string(QuestionType type) { return type == QuestionType::open ? "open" : "closed"; }

QuestionType parse_question_type(const std::string& text) {
    if (text == "open") return QuestionType::open;
    if (text == "closed") return QuestionType::closed;
    throw FormatError("unknown question type '" + text + "'");
}

void SyntheticConfig::validate() const {
    if (scales < 1) throw ParameterError("need at least one scale");
    if (side == 0 || side % mfe::required_divisor(scales) != 0) {
        throw PartitionError("grid side " + std::to_string(side) + " is not divisible by " +
                             std::to_string(mfe::required_divisor(scales)));
    }
    if (width < 2) throw ParameterError("synthetic maps need at least two channels");
    if (classes < 2) throw ParameterError("synthetic task needs at least two classes");
    if (caption_pool < 2) throw ParameterError("caption pool needs at least two captions");
    if (!(noise >= 0.0)) throw ParameterError("noise must be nonnegative");
    if (!(closed_fraction >= 0.0 && closed_fraction <= 1.0)) {
        throw ParameterError("closed fraction must lie in [0, 1]");
    }
    const std::size_t needed = 3 + kTaskWords.size() + finest_blocks() + classes;
    if (vocab_size < needed) {
        throw ParameterError("vocab size " + std::to_string(vocab_size) + " is below the " +
                             std::to_string(needed) + " task tokens");
    }
}

std::size_t SyntheticConfig::finest_blocks() const {
    const std::size_t s = mfe::blocks_per_side(scales);
    return s * s;
}

std::string block_token(std::size_t block) { return "b" + std::to_string(block); }
std::string class_token(std::size_t cls) { return "c" + std::to_string(cls); }

enc::Vocabulary synthetic_vocabulary(const SyntheticConfig& cfg) {
    cfg.validate();
    std::vector<std::string> words = kTaskWords;
    for (std::size_t b = 0; b < cfg.finest_blocks(); ++b) words.push_back(block_token(b));
    for (std::size_t c = 0; c < cfg.classes; ++c) words.push_back(class_token(c));
    for (std::size_t i = 0; words.size() + 3 < cfg.vocab_size; ++i) words.push_back("w" + std::to_string(i));
    return enc::Vocabulary::from_words(words);
}

Codebook make_codebook(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.codebook_seed);
    const std::size_t h = cfg.location_channels();
    Codebook cb;
    cb.locations = rng.normal_tensor({cfg.finest_blocks(), h}, 1.0);
    cb.prototypes = rng.normal_tensor({cfg.classes, cfg.width - h}, 1.0);
    return cb;
}

std::vector<SyntheticSample> make_synthetic_dataset(std::size_t n, const SyntheticConfig& cfg,
                                                    std::uint64_t seed) {
    if (n == 0) throw ParameterError("dataset needs at least one sample");
    const auto vocab = synthetic_vocabulary(cfg);
    const auto cb = make_codebook(cfg);
    const std::size_t h = cfg.location_channels();
    const std::size_t per_side = mfe::blocks_per_side(cfg.scales);
    const std::size_t block_side = cfg.side / per_side;
    Rng rng(seed);

    std::vector<SyntheticSample> out;
    out.reserve(n);
    for (std::size_t id = 0; id < n; ++id) {
        std::vector<std::size_t> classes(cfg.finest_blocks());
        for (auto& c : classes) c = rng.index(cfg.classes);
        const std::size_t planted = rng.index(cfg.finest_blocks());
        const bool closed = rng.uniform() < cfg.closed_fraction;

        Tensor grid({cfg.side, cfg.side, cfg.width});
        for (std::size_t r = 0; r < cfg.side; ++r)
            for (std::size_t c = 0; c < cfg.side; ++c) {
                const std::size_t b = (r / block_side) * per_side + c / block_side;
                for (std::size_t ch = 0; ch < cfg.width; ++ch) {
                    const double base = ch < h ? cb.locations.at(b, ch) : cb.prototypes.at(classes[b], ch - h);
                    grid[(r * cfg.side + c) * cfg.width + ch] = base + cfg.noise * rng.normal();
                }
            }

        SyntheticSample s{id, QuestionType::open, enc::FeatureMap(std::move(grid)), {}, {}, {},
                          mfe::BlockCoord{cfg.scales, planted}, classes};
        if (closed) {
            s.type = QuestionType::closed;
            std::size_t asked = classes[planted];
            const bool truthful = rng.uniform() < 0.5;
            if (!truthful) asked = (asked + 1 + rng.index(cfg.classes - 1)) % cfg.classes;
            s.question = {{enc::Vocabulary::bos, tok(vocab, "is"), tok(vocab, block_token(planted)),
                           tok(vocab, class_token(asked))}};
            s.answer = {{tok(vocab, truthful ? "yes" : "no"), enc::Vocabulary::eos}};
        } else {
            s.question = open_question(vocab, planted);
            s.answer = {{tok(vocab, class_token(classes[planted])), enc::Vocabulary::eos}};
        }
        const int shows = tok(vocab, "shows");
        s.captions.push_back({{tok(vocab, block_token(planted)), shows, tok(vocab, class_token(classes[planted]))}});
        while (s.captions.size() < cfg.caption_pool) {
            const std::size_t b = rng.index(cfg.finest_blocks());
            s.captions.push_back({{tok(vocab, block_token(b)), shows, tok(vocab, class_token(classes[b]))}});
        }
        out.push_back(std::move(s));
    }
    return out;
}

SyntheticSample ask_about(const SyntheticSample& sample, std::size_t block, const SyntheticConfig& cfg) {
    if (block >= sample.block_classes.size()) throw ShapeError("block index outside the grid");
    const auto vocab = synthetic_vocabulary(cfg);
    SyntheticSample s = sample;
    s.type = QuestionType::open;
    s.planted = mfe::BlockCoord{cfg.scales, block};
    s.question = open_question(vocab, block);
    s.answer = {{tok(vocab, class_token(sample.block_classes[block])), enc::Vocabulary::eos}};
    return s;
}

LmExample lm_example(const SyntheticSample& sample) {
    std::vector<int> seq = sample.question.ids;
    seq.insert(seq.end(), sample.answer.ids.begin(), sample.answer.ids.end());
    LmExample ex;
    const std::size_t q = sample.question.ids.size();
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        ex.inputs.ids.push_back(seq[i]);
        ex.targets.ids.push_back(seq[i + 1]);
        ex.mask.push_back(i + 1 >= q ? 1 : 0);
    }
    return ex;
}

} // namespace d2c::train
