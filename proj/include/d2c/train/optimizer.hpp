#pragma once

#include <map>
#include <span>
#include <string>

#include "d2c/numcore/parameter.hpp"

namespace d2c::train {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void validate() const;
    bool operator==(const AdamWConfig&) const = default;
};

// First and second moment estimates for one tensor.
struct MomentState {
    Tensor m;
    Tensor v;
};

// One AdamW update of `w` at step `t` (from 1). Decay is applied to the
// weight directly, then the bias-corrected Adam step.
void adamw_step(Tensor& w, std::span<const double> grad, MomentState& state, std::size_t t,
                double lr, const AdamWConfig& cfg);

class AdamW {
public:
    explicit AdamW(AdamWConfig cfg = {});

    // Updates every parameter in `trainable`, using the gradients currently
    // held by the parameter tensors. All gradients are checked for finiteness
    // before anything is modified.
    void step(ParameterSet& params, const GroupSet& trainable, double lr);

    const AdamWConfig& config() const noexcept { return cfg_; }
    std::size_t steps() const noexcept { return steps_; }
    const std::map<std::string, MomentState>& moments() const noexcept { return moments_; }

    void set_state(std::size_t steps, std::map<std::string, MomentState> moments);

private:
    AdamWConfig cfg_;
    std::size_t steps_ = 0;
    std::map<std::string, MomentState> moments_;
};

} // namespace d2c::train
