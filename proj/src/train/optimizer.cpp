#include "d2c/train/optimizer.hpp"

#include <cmath>

#include "d2c/numcore/errors.hpp"

namespace d2c::train {

void AdamWConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ParameterError("AdamW betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ParameterError("AdamW eps must be positive");
    if (!(weight_decay >= 0.0)) throw ParameterError("AdamW weight decay must be nonnegative");
}

void adamw_step(Tensor& w, std::span<const double> grad, MomentState& state, std::size_t t,
                double lr, const AdamWConfig& cfg) {
    if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
    if (t == 0) throw ParameterError("AdamW step counter starts at 1");
    if (grad.size() != w.size()) throw ShapeError("gradient does not match parameter size");
    if (state.m.size() != w.size()) state.m = Tensor(w.shape());
    if (state.v.size() != w.size()) state.v = Tensor(w.shape());
    for (double g : grad)
        if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient; step aborted");

    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    auto wd = w.data();
    auto m = state.m.data();
    auto v = state.v.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
        wd[i] -= lr * cfg.weight_decay * wd[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        wd[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

AdamW::AdamW(AdamWConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void AdamW::step(ParameterSet& params, const GroupSet& trainable, double lr) {
    for (auto& p : params) {
        if (!trainable.contains(p.group())) continue;
        for (double g : p.tensor().grad())
            if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in '" + p.name() + "'; step aborted");
    }
    ++steps_;
    for (auto& p : params) {
        if (!trainable.contains(p.group())) continue;
        Tensor& t = p.tensor();
        std::vector<double> grad(t.size(), 0.0);
        if (!t.grad().empty()) grad.assign(t.grad().begin(), t.grad().end());
        adamw_step(t, grad, moments_[p.name()], steps_, lr, cfg_);
    }
}

void AdamW::set_state(std::size_t steps, std::map<std::string, MomentState> moments) {
    steps_ = steps;
    moments_ = std::move(moments);
}

} // namespace d2c::train
