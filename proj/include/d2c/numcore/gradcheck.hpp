#pragma once

#include <functional>
#include <optional>
#include <string>

#include "d2c/numcore/parameter.hpp"

namespace d2c {

struct GradCheckOptions {
    double eps = 1e-5;
    // Fault injection for harness self-tests: doubles the analytic gradient
    // of the largest-magnitude entry of the named parameter.
    std::optional<std::string> corrupt_param;
};

struct GradCheckEntry {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    GradCheckEntry worst;
    std::size_t entries_checked = 0;
};

// Compares the reverse-mode gradient of the scalar f() with central
// differences over every entry of every parameter in `params`:
//   err = |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// f must rebuild its graph from the current parameter values on each call.
GradCheckResult grad_check(const std::function<Var()>& f, ParameterSet& params,
                           const GradCheckOptions& options = {});

} // namespace d2c
