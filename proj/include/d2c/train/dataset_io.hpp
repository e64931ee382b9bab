#pragma once

#include <filesystem>
#include <vector>

#include "d2c/train/synthetic.hpp"

namespace d2c::train {

// Directory with dataset.jsonl (one record per sample), maps.d2ct
// (n × N × N × D) and vocab.txt.
void save_dataset(const std::filesystem::path& dir, const std::vector<SyntheticSample>& samples,
                  const enc::Vocabulary& vocab);

struct LoadedDataset {
    std::vector<SyntheticSample> samples;
    enc::Vocabulary vocab;
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

} // namespace d2c::train
