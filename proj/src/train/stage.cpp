#include "d2c/train/stage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/ops.hpp"
#include "d2c/numcore/rng.hpp"

namespace d2c::train {

void StageConfig::validate() const {
    if (!(lr > 0.0)) throw ParameterError("stage '" + name + "': learning rate must be positive");
    if (epochs < 1) throw ParameterError("stage '" + name + "': needs at least one epoch");
    if (trainable.empty()) throw ParameterError("stage '" + name + "': no trainable groups");
    if (batch_size < 1) throw ParameterError("stage '" + name + "': batch size must be positive");
    if (!(lambda >= 0.0)) throw ParameterError("stage '" + name + "': lambda must be nonnegative");
    adam.validate();
}

std::string to_string(LrSchedule schedule) {
    return schedule == LrSchedule::linear ? "linear" : "constant";
}

LrSchedule parse_lr_schedule(std::string_view text) {
    if (text == "constant") return LrSchedule::constant;
    if (text == "linear") return LrSchedule::linear;
    throw ParameterError("unknown learning rate schedule '" + std::string(text) + "'");
}

std::size_t StageConfig::planned_steps(std::size_t samples) const {
    const std::size_t per_epoch = (samples + batch_size - 1) / batch_size;
    const std::size_t total = per_epoch * epochs;
    return max_steps != 0 ? std::min(total, max_steps) : total;
}

double StageConfig::learning_rate(std::size_t step, std::size_t total) const {
    if (schedule == LrSchedule::constant || total == 0) return lr;
    return lr * static_cast<double>(total - std::min(step, total)) / static_cast<double>(total);
}

StageConfig stage_one_defaults() {
    StageConfig c;
    c.name = "stage1";
    c.lambda = 0.0;
    c.lr = 5e-5;
    c.epochs = 1;
    c.trainable = {ParamGroup::projector, ParamGroup::fusion, ParamGroup::gate, ParamGroup::embedding};
    return c;
}

StageConfig stage_two_defaults() {
    StageConfig c;
    c.name = "stage2";
    c.lambda = 1.0;
    c.lr = 2e-5;
    c.epochs = 5;
    c.trainable = {ParamGroup::projector, ParamGroup::fusion, ParamGroup::gate, ParamGroup::lm,
                   ParamGroup::embedding};
    return c;
}

StageResult run_stage(Model& model, const std::vector<SyntheticSample>& data, const StageConfig& cfg,
                      const StepCallback& on_step) {
    cfg.validate();
    if (data.empty()) throw DegenerateInputError("stage '" + cfg.name + "': no training data");

    StageResult result{{}, AdamW(cfg.adam), false, {}};
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::size_t step = 0;
    const std::size_t total_steps = cfg.planned_steps(data.size());
    auto& params = model.params();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            if (cfg.max_steps != 0 && step == cfg.max_steps) return result;
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);

            params.zero_grad();
            std::vector<Var> sem_terms, nll_terms;
            for (std::size_t i = start; i < end; ++i) {
                auto fwd = model.forward(data[order[i]]);
                sem_terms.push_back(fwd.l_sem);
                nll_terms.push_back(fwd.l_nll);
            }
            Var l_sem = ops::scale(ops::sum(ops::stack(sem_terms)), inv);
            Var l_nll = ops::scale(ops::sum(ops::stack(nll_terms)), inv);
            // With lambda = 0 the semantic term stays out of the graph entirely.
            Var total = cfg.lambda == 0.0 ? l_nll : sem::total_loss(l_sem, l_nll, cfg.lambda);

            LossRecord rec{step + 1, sem::total_loss(l_sem.item(), l_nll.item(), cfg.lambda), l_sem.item(),
                           l_nll.item()};
            if (!std::isfinite(rec.l_total) || !std::isfinite(rec.l_sem) || !std::isfinite(rec.l_nll)) {
                result.aborted = true;
                result.abort_reason = "non-finite loss at step " + std::to_string(rec.step);
                params.zero_grad();
                return result;
            }
            total.backward();
            try {
                result.optimizer.step(params, cfg.trainable, cfg.learning_rate(step, total_steps));
            } catch (const NonFiniteError& e) {
                result.aborted = true;
                result.abort_reason = e.what();
                params.zero_grad();
                return result;
            }
            ++step;
            result.curve.push_back(rec);
            if (on_step) on_step(rec);
        }
    }
    params.zero_grad();
    return result;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,l_total,l_sem,l_nll\n";
    char buf[128];
    for (const auto& r : curve) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.step, r.l_total, r.l_sem, r.l_nll);
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<LossRecord> read_loss_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "step,l_total,l_sem,l_nll") {
        throw FormatError(path.string() + ": missing loss CSV header");
    }
    std::vector<LossRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        LossRecord r;
        char extra = 0;
        if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf%c", &r.step, &r.l_total, &r.l_sem, &r.l_nll, &extra) != 4) {
            throw FormatError(path.string() + ": bad loss row '" + line + "'");
        }
        out.push_back(r);
    }
    return out;
}

} // namespace d2c::train
