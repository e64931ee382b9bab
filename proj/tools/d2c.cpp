#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "d2c/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace d2c::cli;

int main(int argc, char** argv) {
    CLI::App app{"Multi-scale fusion VQA toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    app.add_option("--config", config_path, "Experiment config (TOML)");
    app.add_option("--seed", seed, "Run seed, overrides [run] seed");
    app.add_option("--out", out_dir, "Output directory, overrides [run] out");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
    std::string corrupt;
    gradcheck->add_option("--corrupt", corrupt, "Double the analytic gradient of this model parameter");

    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
    std::string split = "train";
    std::optional<std::size_t> count;
    synth->add_option("--split", split, "train or heldout")->check(CLI::IsMember({"train", "heldout"}));
    synth->add_option("--n", count, "Number of samples");

    auto* train = app.add_subcommand("train", "Run both training stages");

    auto* eval = app.add_subcommand("eval", "Greedy-decode answers and score them");
    std::string checkpoint, dataset;
    bool oracle = false;
    eval->add_option("--checkpoint", checkpoint, "Checkpoint directory (omit for the untrained model)");
    eval->add_option("--dataset", dataset, "Dataset directory written by synth (default: held-out split)");
    eval->add_flag("--oracle", oracle, "Score the references against themselves");

    auto* attention = app.add_subcommand("export-attention", "Write fusion attention maps");
    std::size_t sample = 0;
    std::optional<std::size_t> block;
    attention->add_option("--checkpoint", checkpoint, "Checkpoint directory");
    attention->add_option("--dataset", dataset, "Dataset directory (default: held-out split)");
    attention->add_option("--sample", sample, "Sample index");
    attention->add_option("--block", block, "Ask about this finest block instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed) cfg.set_seed(*seed);
        if (!out_dir.empty()) cfg.out = out_dir;
        if (!corrupt.empty()) cfg.gradcheck.corrupt = corrupt;
        cfg.validate();
        const fs::path out = cfg.out;

        if (*gradcheck) return cmd_gradcheck(cfg, std::cout);
        if (*synth) return cmd_synth(cfg, out, split == "heldout", count, std::cout);
        if (*train) return cmd_train(cfg, out, std::cout);
        if (*eval) return cmd_eval(cfg, checkpoint, dataset, oracle, out, std::cout);
        if (*attention) return cmd_export_attention(cfg, checkpoint, dataset, sample, block, out, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return exit_usage;
}
