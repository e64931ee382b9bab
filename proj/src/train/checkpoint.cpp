#include "d2c/train/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

#include "d2c/numcore/errors.hpp"
#include "d2c/numcore/tensor_io.hpp"

namespace d2c::train {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "d2c-checkpoint";

void create_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

json read_manifest(const fs::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    json m;
    try {
        in >> m;
    } catch (const json::exception& e) {
        throw FormatError("bad checkpoint manifest: " + std::string(e.what()));
    }
    if (!m.is_object() || m.value("format", "") != kFormat) {
        throw FormatError("not a checkpoint manifest: " + (dir / "manifest.json").string());
    }
    return m;
}

} // namespace

void save_checkpoint(const fs::path& dir, const ParameterSet& params, const AdamW* optimizer) {
    create_dirs(dir / "params");
    json manifest;
    manifest["format"] = kFormat;
    manifest["version"] = 1;
    json entries = json::array();
    for (const auto& p : params) {
        const std::string file = "params/" + p.name() + ".d2ct";
        save_tensor(dir / file, p.tensor());
        entries.push_back({{"name", p.name()},
                           {"file", file},
                           {"group", std::string(to_string(p.group()))},
                           {"shape", p.tensor().shape()}});
    }
    manifest["parameters"] = entries;

    if (optimizer) {
        create_dirs(dir / "optim");
        const auto& c = optimizer->config();
        json opt{{"steps", optimizer->steps()},
                 {"beta1", c.beta1},
                 {"beta2", c.beta2},
                 {"eps", c.eps},
                 {"weight_decay", c.weight_decay}};
        json moments = json::array();
        for (const auto& [name, st] : optimizer->moments()) {
            const std::string m = "optim/" + name + ".m.d2ct";
            const std::string v = "optim/" + name + ".v.d2ct";
            save_tensor(dir / m, st.m);
            save_tensor(dir / v, st.v);
            moments.push_back({{"name", name}, {"m", m}, {"v", v}});
        }
        opt["moments"] = moments;
        manifest["optimizer"] = opt;
    }

    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + (dir / "manifest.json").string());
}

void load_checkpoint(const fs::path& dir, ParameterSet& params, AdamW* optimizer) {
    const json manifest = read_manifest(dir);
    std::map<std::string, Tensor> values;
    try {
        for (const auto& e : manifest.at("parameters")) {
            const auto name = e.at("name").get<std::string>();
            if (!params.contains(name)) throw LoadError("checkpoint parameter '" + name + "' is not in the model");
            const auto& p = params.get(name);
            if (e.at("group").get<std::string>() != to_string(p.group())) {
                throw LoadError("parameter '" + name + "' has group " + e.at("group").get<std::string>() +
                                ", model expects " + std::string(to_string(p.group())));
            }
            Tensor t = load_tensor(dir / e.at("file").get<std::string>());
            if (t.shape() != p.tensor().shape()) {
                throw LoadError("parameter '" + name + "' has shape " + shape_string(t.shape()) +
                                ", model expects " + shape_string(p.tensor().shape()));
            }
            values.emplace(name, std::move(t));
        }
    } catch (const json::exception& e) {
        throw FormatError("bad checkpoint manifest: " + std::string(e.what()));
    }
    for (const auto& p : params)
        if (!values.contains(p.name())) throw LoadError("parameter '" + p.name() + "' missing from checkpoint");

    std::map<std::string, MomentState> moments;
    std::size_t steps = 0;
    if (optimizer) {
        if (!manifest.contains("optimizer")) throw LoadError("checkpoint has no optimizer state");
        try {
            const auto& opt = manifest.at("optimizer");
            steps = opt.at("steps").get<std::size_t>();
            for (const auto& e : opt.at("moments")) {
                const auto name = e.at("name").get<std::string>();
                if (!values.contains(name)) throw LoadError("optimizer state for unknown parameter '" + name + "'");
                MomentState st{load_tensor(dir / e.at("m").get<std::string>()),
                               load_tensor(dir / e.at("v").get<std::string>())};
                if (st.m.shape() != values.at(name).shape() || st.v.shape() != values.at(name).shape()) {
                    throw LoadError("optimizer state for '" + name + "' has the wrong shape");
                }
                moments.emplace(name, std::move(st));
            }
        } catch (const json::exception& e) {
            throw FormatError("bad optimizer manifest: " + std::string(e.what()));
        }
    }
    params.restore(values);
    if (optimizer) optimizer->set_state(steps, std::move(moments));
}

} // namespace d2c::train
