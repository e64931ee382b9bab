#pragma once

#include <functional>
#include <string>
#include <vector>

#include "d2c/cli/config.hpp"
#include "d2c/numcore/gradcheck.hpp"

namespace d2c::cli {

constexpr double kGradcheckTolerance = 1e-4;

struct GradcheckRow {
    std::string component;
    GradCheckResult result;
    bool passed = false;
};

// Runs grad_check over every primitive op, each model component and the
// full objective (text encoder → fusion → gate → semantic and LM losses).
// `on_row` sees each result as soon as it is available.
std::vector<GradcheckRow> run_gradchecks(const ExperimentConfig& cfg,
                                         const std::function<void(const GradcheckRow&)>& on_row = {});

} // namespace d2c::cli
