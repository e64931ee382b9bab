#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "d2c/numcore/autodiff.hpp"

namespace d2c {

enum class ParamGroup { projector, fusion, gate, lm, embedding };

std::string_view to_string(ParamGroup group);
std::optional<ParamGroup> parse_group(std::string_view name);

using GroupSet = std::set<ParamGroup>;

// A named trainable leaf. Copies share the underlying tensor.
class Parameter {
public:
    Parameter(std::string name, ParamGroup group, Tensor init);

    const std::string& name() const noexcept { return name_; }
    ParamGroup group() const noexcept { return group_; }
    const Var& var() const noexcept { return var_; }
    Tensor& tensor() { return var_.value(); }
    const Tensor& tensor() const { return var_.value(); }

private:
    std::string name_;
    ParamGroup group_;
    Var var_;
};

// Ordered registry of parameters with unique names. Iteration order is
// registration order, which fixes every reduction and serialization order.
class ParameterSet {
public:
    Var add(std::string name, ParamGroup group, Tensor init);

    const Parameter& get(std::string_view name) const;
    Parameter& get(std::string_view name);
    bool contains(std::string_view name) const;

    std::size_t size() const noexcept { return params_.size(); }
    std::size_t scalar_count() const;
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    // Deep copy of the current values, keyed by name.
    std::map<std::string, Tensor> snapshot() const;
    void restore(const std::map<std::string, Tensor>& values);

private:
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace d2c
