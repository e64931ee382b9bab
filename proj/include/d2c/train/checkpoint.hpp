#pragma once

#include <filesystem>

#include "d2c/numcore/parameter.hpp"
#include "d2c/train/optimizer.hpp"

namespace d2c::train {

// Directory layout: manifest.json, params/<name>.d2ct and, when an optimizer
// is given, optim/<name>.m.d2ct and optim/<name>.v.d2ct.
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const AdamW* optimizer = nullptr);

// Loads values into an existing parameter set. Every parameter must be
// present with a matching shape and group; otherwise LoadError names it.
void load_checkpoint(const std::filesystem::path& dir, ParameterSet& params, AdamW* optimizer = nullptr);

} // namespace d2c::train
