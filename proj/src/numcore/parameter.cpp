#include "d2c/numcore/parameter.hpp"

#include "d2c/numcore/errors.hpp"

namespace d2c {

std::string_view to_string(ParamGroup group) {
    switch (group) {
    case ParamGroup::projector: return "projector";
    case ParamGroup::fusion: return "fusion";
    case ParamGroup::gate: return "gate";
    case ParamGroup::lm: return "lm";
    case ParamGroup::embedding: return "embedding";
    }
    return "?";
}

std::optional<ParamGroup> parse_group(std::string_view name) {
    for (auto g : {ParamGroup::projector, ParamGroup::fusion, ParamGroup::gate, ParamGroup::lm,
                   ParamGroup::embedding}) {
        if (to_string(g) == name) return g;
    }
    return std::nullopt;
}

Parameter::Parameter(std::string name, ParamGroup group, Tensor init)
    : name_(std::move(name)), group_(group), var_(Var::leaf(std::move(init))) {}

Var ParameterSet::add(std::string name, ParamGroup group, Tensor init) {
    if (index_.contains(name)) throw ParameterError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    params_.emplace_back(std::move(name), group, std::move(init));
    return params_.back().var();
}

const Parameter& ParameterSet::get(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw LookupError("unknown parameter '" + std::string(name) + "'");
    return params_[it->second];
}

Parameter& ParameterSet::get(std::string_view name) {
    return const_cast<Parameter&>(std::as_const(*this).get(name));
}

bool ParameterSet::contains(std::string_view name) const {
    return index_.contains(std::string(name));
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor().size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.tensor().zero_grad();
}

std::map<std::string, Tensor> ParameterSet::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& p : params_) {
        Tensor copy(p.tensor().shape(), std::vector<double>(p.tensor().data().begin(),
                                                            p.tensor().data().end()));
        out.emplace(p.name(), std::move(copy));
    }
    return out;
}

void ParameterSet::restore(const std::map<std::string, Tensor>& values) {
    for (auto& p : params_) {
        auto it = values.find(p.name());
        if (it == values.end()) throw LoadError("missing value for parameter '" + p.name() + "'");
        if (it->second.shape() != p.tensor().shape()) {
            throw LoadError("parameter '" + p.name() + "' has shape " +
                            shape_string(it->second.shape()) + ", expected " +
                            shape_string(p.tensor().shape()));
        }
        auto dst = p.tensor().data();
        auto src = it->second.data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

} // namespace d2c
