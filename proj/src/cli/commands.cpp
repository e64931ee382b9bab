#include "d2c/cli/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "d2c/cli/attention_export.hpp"
#include "d2c/cli/gradcheck_suite.hpp"
#include "d2c/numcore/errors.hpp"
#include "d2c/train/checkpoint.hpp"
#include "d2c/train/dataset_io.hpp"

namespace d2c::cli {
namespace fs = std::filesystem;

namespace {

void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

std::string answer_text(const enc::Vocabulary& vocab, const std::vector<int>& ids) { return vocab.decode(ids); }

} // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e) || dynamic_cast<const LoadError*>(&e)) {
        return exit_io;
    }
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
        dynamic_cast<const LookupError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
        dynamic_cast<const PartitionError*>(&e) || dynamic_cast<const CapacityError*>(&e) ||
        dynamic_cast<const DegenerateInputError*>(&e)) {
        return exit_usage;
    }
    return exit_check_failed;
}

TrainRun train_experiment(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
    cfg.validate();
    make_dir(out);
    {
        std::ofstream c(out / "config.toml");
        if (!c) throw IoError("cannot write " + (out / "config.toml").string());
        c << serialize_config(cfg);
    }
    const auto data = train::make_synthetic_dataset(cfg.train_samples, cfg.synth, cfg.train_data_seed());
    TrainRun run;
    run.model = std::make_unique<train::Model>(cfg.model, cfg.init_seed());

    for (const auto* stage : {&cfg.stage1, &cfg.stage2}) {
        const auto start = std::chrono::steady_clock::now();
        auto on_step = [&](const train::LossRecord& r) {
            if (r.step == 1 || r.step % 100 == 0) {
                log << stage->name << " step " << r.step << " l_total " << fixed(r.l_total) << " l_sem "
                    << fixed(r.l_sem) << " l_nll " << fixed(r.l_nll) << '\n';
            }
        };
        auto result = train::run_stage(*run.model, data, *stage, on_step);
        const fs::path dir = out / stage->name;
        make_dir(dir);
        train::write_loss_csv(dir / "loss.csv", result.curve);
        train::save_checkpoint(dir / "checkpoint", run.model->params(), &result.optimizer);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << stage->name << " finished " << result.curve.size() << " steps in " << fixed(secs, 1) << " s\n";
        (stage == &cfg.stage1 ? run.stage1 : run.stage2) = std::move(result.curve);
        if (result.aborted) {
            run.aborted = true;
            run.abort_reason = stage->name + ": " + result.abort_reason;
            return run;
        }
    }
    return run;
}

std::unique_ptr<train::Model> load_model(const ExperimentConfig& cfg, const fs::path& checkpoint) {
    auto model = std::make_unique<train::Model>(cfg.model, cfg.init_seed());
    if (!checkpoint.empty()) train::load_checkpoint(checkpoint, model->params());
    return model;
}

std::vector<train::SyntheticSample> eval_samples(const ExperimentConfig& cfg, const fs::path& dataset,
                                                 enc::Vocabulary* vocab) {
    if (dataset.empty()) {
        if (vocab) *vocab = train::synthetic_vocabulary(cfg.synth);
        return train::make_synthetic_dataset(cfg.heldout_samples, cfg.synth, cfg.heldout_data_seed());
    }
    auto loaded = train::load_dataset(dataset);
    if (loaded.vocab.size() != cfg.model.vocab) {
        throw ShapeError("dataset vocabulary has " + std::to_string(loaded.vocab.size()) + " tokens, model expects " +
                         std::to_string(cfg.model.vocab));
    }
    if (vocab) *vocab = loaded.vocab;
    return std::move(loaded.samples);
}

std::vector<metrics::EvalRecord> predict(const train::Model* model, const std::vector<train::SyntheticSample>& samples,
                                         const enc::Vocabulary& vocab, bool oracle) {
    if (!oracle && !model) throw ParameterError("predictions need a model");
    std::vector<metrics::EvalRecord> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        metrics::EvalRecord r;
        r.id = std::to_string(s.id);
        r.type = s.type == train::QuestionType::open ? metrics::QuestionType::open : metrics::QuestionType::closed;
        r.reference = answer_text(vocab, s.answer.ids);
        r.candidate = oracle ? r.reference : answer_text(vocab, model->answer(s, s.answer.ids.size() + 2));
        out.push_back(std::move(r));
    }
    return out;
}

AttentionExport export_attention(const train::Model& model, const train::SyntheticSample& sample) {
    NoGradGuard guard;
    fusion::FusionOutput fused;
    model.condition(sample, &fused);
    const std::size_t scales = model.config().scales;
    const auto index = mfe::pyramid_index(scales);
    AttentionExport ex;
    for (const auto& w : fused.attn_maps) ex.layers.push_back(aggregate_attention(w, index, scales));
    ex.mean = mean_grid(ex.layers);
    ex.planted = sample.planted.index;
    return ex;
}

int cmd_gradcheck(const ExperimentConfig& cfg, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = true;
    std::string first_failure;
    run_gradchecks(cfg, [&](const GradcheckRow& row) {
        out << row.component << " max_rel_error " << sci(row.result.max_rel_error) << " entries "
            << row.result.entries_checked << (row.passed ? " ok" : " FAIL") << '\n';
        if (!row.passed) {
            out << "  worst " << row.result.worst.param << "[" << row.result.worst.index << "] analytic "
                << row.result.worst.analytic << " numeric " << row.result.worst.numeric << '\n';
            if (ok) first_failure = row.component;
            ok = false;
        }
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!ok) {
        out << "gradient check failed: " << first_failure << " (" << fixed(secs, 1) << " s)\n";
        return exit_check_failed;
    }
    out << "all gradient checks below " << sci(kGradcheckTolerance) << " (" << fixed(secs, 1) << " s)\n";
    return exit_ok;
}

int cmd_synth(const ExperimentConfig& cfg, const fs::path& out, bool heldout, std::optional<std::size_t> count,
              std::ostream& log) {
    cfg.validate();
    const std::size_t n = count.value_or(heldout ? cfg.heldout_samples : cfg.train_samples);
    const auto seed = heldout ? cfg.heldout_data_seed() : cfg.train_data_seed();
    auto samples = train::make_synthetic_dataset(n, cfg.synth, seed);
    train::save_dataset(out, samples, train::synthetic_vocabulary(cfg.synth));
    log << "wrote " << n << (heldout ? " held-out" : " training") << " samples to " << out.string() << '\n';
    return exit_ok;
}

int cmd_train(const ExperimentConfig& cfg, const fs::path& out, std::ostream& log) {
    auto run = train_experiment(cfg, out, log);
    if (run.aborted) {
        log << "training aborted: " << run.abort_reason << " (last good parameters kept)\n";
        return exit_check_failed;
    }
    return exit_ok;
}

int cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& dataset, bool oracle,
             const fs::path& out, std::ostream& log) {
    cfg.validate();
    enc::Vocabulary vocab = train::synthetic_vocabulary(cfg.synth);
    const auto samples = eval_samples(cfg, dataset, &vocab);
    std::unique_ptr<train::Model> model;
    if (!oracle) model = load_model(cfg, checkpoint);
    const auto records = predict(model.get(), samples, vocab, oracle);
    const auto summary = metrics::summarize(records);
    make_dir(out);
    metrics::write_predictions(out / "predictions.jsonl", records);
    metrics::write_summary_csv(out / "summary.csv", summary);
    for (const auto& m : summary) log << m.metric << ' ' << fixed(m.value) << " (n=" << m.count << ")\n";
    return exit_ok;
}

int cmd_export_attention(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& dataset,
                         std::size_t sample, std::optional<std::size_t> block, const fs::path& out, std::ostream& log) {
    cfg.validate();
    const auto samples = eval_samples(cfg, dataset);
    if (sample >= samples.size()) {
        throw LookupError("sample " + std::to_string(sample) + " out of range (" + std::to_string(samples.size()) +
                          " samples)");
    }
    auto s = samples[sample];
    if (s.map.side() % mfe::required_divisor(cfg.model.scales) != 0) {
        throw ShapeError("sample grid of side " + std::to_string(s.map.side()) + " does not fit " +
                         std::to_string(cfg.model.scales) + " scales");
    }
    if (block) s = train::ask_about(s, *block, cfg.synth);
    const auto model = load_model(cfg, checkpoint);
    const auto ex = export_attention(*model, s);
    make_dir(out);
    for (std::size_t l = 0; l < ex.layers.size(); ++l) {
        write_grid_csv(out / ("attn_layer" + std::to_string(l) + ".csv"), ex.layers[l]);
        write_grid_pgm(out / ("attn_layer" + std::to_string(l) + ".pgm"), ex.layers[l]);
    }
    write_grid_csv(out / "attn_mean.csv", ex.mean);
    write_grid_pgm(out / "attn_mean.pgm", ex.mean);
    const auto share = attention_share(ex.mean);
    log << "sample " << sample << " asked block " << ex.planted << " argmax block " << argmax_cell(ex.mean)
        << " share on asked block " << fixed(share[ex.planted], 4) << '\n';
    return exit_ok;
}

} // namespace d2c::cli
