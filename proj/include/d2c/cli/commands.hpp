#pragma once

#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>

#include "d2c/cli/config.hpp"
#include "d2c/metrics/metrics.hpp"

namespace d2c::cli {

enum ExitCode : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2, exit_io = 3 };

// Usage-type errors map to 2, file and format problems to 3, everything else
// (divergence, non-finite values) to 1.
int exit_code_for(const std::exception& e);

struct TrainRun {
    std::unique_ptr<train::Model> model;
    std::vector<train::LossRecord> stage1;
    std::vector<train::LossRecord> stage2;
    bool aborted = false;
    std::string abort_reason;
};

// Stage 1 then stage 2 on the configured training split. Writes
// <out>/config.toml and, per stage, <out>/<stage>/loss.csv and
// <out>/<stage>/checkpoint/. An aborted stage still writes its files.
TrainRun train_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Model initialised from the config, then overwritten from `checkpoint`
// when one is given.
std::unique_ptr<train::Model> load_model(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint);

// Held-out split of the config, or the dataset directory when given.
std::vector<train::SyntheticSample> eval_samples(const ExperimentConfig& cfg, const std::filesystem::path& dataset,
                                                 enc::Vocabulary* vocab = nullptr);

// Greedy answers scored against the references. With `oracle` set the
// references are scored against themselves and no model is needed.
std::vector<metrics::EvalRecord> predict(const train::Model* model, const std::vector<train::SyntheticSample>& samples,
                                         const enc::Vocabulary& vocab, bool oracle);

struct AttentionExport {
    // One g × g grid per fusion layer, then their mean.
    std::vector<Tensor> layers;
    Tensor mean;
    std::size_t planted = 0;
};

AttentionExport export_attention(const train::Model& model, const train::SyntheticSample& sample);

int cmd_gradcheck(const ExperimentConfig& cfg, std::ostream& out);
int cmd_synth(const ExperimentConfig& cfg, const std::filesystem::path& out, bool heldout,
              std::optional<std::size_t> count, std::ostream& log);
int cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out, std::ostream& log);
int cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
             bool oracle, const std::filesystem::path& out, std::ostream& log);
int cmd_export_attention(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::filesystem::path& dataset, std::size_t sample, std::optional<std::size_t> block,
                         const std::filesystem::path& out, std::ostream& log);

} // namespace d2c::cli
