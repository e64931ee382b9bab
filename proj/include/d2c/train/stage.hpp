#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "d2c/train/model.hpp"
#include "d2c/train/optimizer.hpp"

namespace d2c::train {

// Learning rate over a stage: fixed, or decayed linearly towards zero across
// the planned steps.
enum class LrSchedule { constant, linear };

std::string to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(std::string_view text);

struct StageConfig {
    std::string name = "stage";
    double lambda = 0.0;
    double lr = 5e-5;
    std::size_t epochs = 1;
    GroupSet trainable;
    std::uint64_t seed = 0;
    std::size_t batch_size = 8;
    // Upper bound on optimizer steps; 0 runs every epoch to completion.
    std::size_t max_steps = 0;
    LrSchedule schedule = LrSchedule::constant;
    AdamWConfig adam;

    void validate() const;
    // Optimizer steps the stage will take on `samples` training samples.
    std::size_t planned_steps(std::size_t samples) const;
    // Learning rate for 0-based `step` of `total`.
    double learning_rate(std::size_t step, std::size_t total) const;
};

// Stage 1: text projector, fusion, gate and embedding train with the LM frozen.
StageConfig stage_one_defaults();
// Stage 2: every group trains.
StageConfig stage_two_defaults();

struct LossRecord {
    std::size_t step = 0;
    double l_total = 0.0;
    double l_sem = 0.0;
    double l_nll = 0.0;

    bool operator==(const LossRecord&) const = default;
};

struct StageResult {
    std::vector<LossRecord> curve;
    AdamW optimizer;
    bool aborted = false;
    std::string abort_reason;
};

using StepCallback = std::function<void(const LossRecord&)>;

// Runs the stage in place on `model`. Only parameters in the trainable groups
// are updated. A non-finite loss or gradient stops the run before the
// offending update, leaving the last good parameters in the model.
StageResult run_stage(Model& model, const std::vector<SyntheticSample>& data, const StageConfig& cfg,
                      const StepCallback& on_step = {});

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve);
std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path);

} // namespace d2c::train
