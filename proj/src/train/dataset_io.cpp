#include "d2c/train/dataset_io.hpp"

#include <fstream>

#include "json.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/tensor_io.hpp"

namespace d2c::train {
namespace fs = std::filesystem;
using nlohmann::json;

void save_dataset(const fs::path& dir, const std::vector<SyntheticSample>& samples, const enc::Vocabulary& vocab) {
    if (samples.empty()) throw DegenerateInputError("nothing to save");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const std::size_t side = samples[0].map.side(), width = samples[0].map.width();
    Tensor maps({samples.size(), side, side, width});
    std::ofstream out(dir / "dataset.jsonl");
    if (!out) throw IoError("cannot write " + (dir / "dataset.jsonl").string());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.map.side() != side || s.map.width() != width) throw ShapeError("samples have different map shapes");
        std::copy(s.map.grid().data().begin(), s.map.grid().data().end(),
                  maps.data().begin() + static_cast<std::ptrdiff_t>(i * side * side * width));
        json captions = json::array();
        for (const auto& c : s.captions) captions.push_back(vocab.decode(c.ids));
        json rec{{"id", s.id},
                 {"type", to_string(s.type)},
                 {"question", vocab.decode(s.question.ids)},
                 {"answer", vocab.decode(s.answer.ids)},
                 {"planted_scale", s.planted.scale},
                 {"planted_block", s.planted.index},
                 {"block_classes", s.block_classes},
                 {"captions", captions}};
        out << rec.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + (dir / "dataset.jsonl").string());
    save_tensor(dir / "maps.d2ct", maps);
    vocab.save(dir / "vocab.txt");
}

LoadedDataset load_dataset(const fs::path& dir) {
    LoadedDataset d{{}, enc::Vocabulary::load(dir / "vocab.txt")};
    const Tensor maps = load_tensor(dir / "maps.d2ct");
    if (maps.rank() != 4 || maps.dim(1) != maps.dim(2)) throw FormatError("maps.d2ct must be n × N × N × D");
    const std::size_t side = maps.dim(1), width = maps.dim(3), per = side * side * width;

    std::ifstream in(dir / "dataset.jsonl");
    if (!in) throw IoError("cannot read " + (dir / "dataset.jsonl").string());
    std::string line;
    std::size_t row = 0;
    const auto with_bos = [&](const std::string& text) {
        std::vector<int> ids{enc::Vocabulary::bos};
        for (int id : d.vocab.encode(text)) ids.push_back(id);
        return ids;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (row >= maps.dim(0)) throw FormatError("dataset.jsonl has more records than maps.d2ct");
        try {
            const auto j = json::parse(line);
            Tensor grid({side, side, width});
            std::copy(maps.data().begin() + static_cast<std::ptrdiff_t>(row * per),
                      maps.data().begin() + static_cast<std::ptrdiff_t>((row + 1) * per), grid.data().begin());
            SyntheticSample s{j.at("id").get<std::size_t>(),
                              parse_question_type(j.at("type").get<std::string>()),
                              enc::FeatureMap(std::move(grid)),
                              {with_bos(j.at("question").get<std::string>())},
                              {d.vocab.encode(j.at("answer").get<std::string>())},
                              {},
                              {j.at("planted_scale").get<std::size_t>(), j.at("planted_block").get<std::size_t>()},
                              j.at("block_classes").get<std::vector<std::size_t>>()};
            s.answer.ids.push_back(enc::Vocabulary::eos);
            for (const auto& c : j.at("captions")) s.captions.push_back({d.vocab.encode(c.get<std::string>())});
            if (s.planted.index >= s.block_classes.size()) throw FormatError("planted block outside the grid");
            d.samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw FormatError((dir / "dataset.jsonl").string() + ": record " + std::to_string(row) + ": " + e.what());
        }
        ++row;
    }
    if (row != maps.dim(0)) throw FormatError("dataset.jsonl and maps.d2ct disagree on the sample count");
    return d;
}

} // namespace d2c::train
