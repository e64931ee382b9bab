#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "d2c/train/stage.hpp"

namespace d2c::cli {

// Settings for the `gradcheck` command.
struct GradcheckSettings {
    double eps = 1e-5;
    // Image side used for the full-objective check.
    std::size_t side = 4;
    std::size_t samples = 1;
    // Parameter of the full model whose analytic gradient is doubled.
    std::string corrupt;
};

struct ExperimentConfig {
    train::ModelConfig model;
    train::SyntheticConfig synth;
    std::size_t train_samples = 512;
    std::size_t heldout_samples = 200;
    train::StageConfig stage1 = train::stage_one_defaults();
    train::StageConfig stage2 = train::stage_two_defaults();
    // Derived seeds: model init = seed, training data = seed + 1, held-out
    // data = seed + 2, stage shuffles = seed + 3 and seed + 4.
    GradcheckSettings gradcheck;
    std::uint64_t seed = 0;
    std::string out = "out";

    ExperimentConfig() { set_seed(0); }

    // Checks every module precondition and cross-section consistency.
    void validate() const;

    // Sets the run seed; stage shuffling seeds follow from it.
    void set_seed(std::uint64_t value);
    std::uint64_t init_seed() const { return seed; }
    std::uint64_t train_data_seed() const { return seed + 1; }
    std::uint64_t heldout_data_seed() const { return seed + 2; }
};

// Parsed document: section → key → raw value.
using TomlValue = std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>>;
using TomlTable = std::map<std::string, std::map<std::string, TomlValue>>;

// Subset of TOML: `[section]` headers, `key = value` lines, `#` comments.
// Values are booleans, integers, floats, basic strings and one-line arrays
// of strings.
TomlTable parse_toml(std::string_view text);

ExperimentConfig config_from_table(const TomlTable& table);
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every setting, one section per component; parse_config of the result
// gives back the same settings.
std::string serialize_config(const ExperimentConfig& cfg);

} // namespace d2c::cli
