#pragma once

#include <filesystem>
#include <iosfwd>

#include "d2c/numcore/tensor.hpp"

namespace d2c {

// Binary tensor files: "D2CT", u32 rank, u64 dims[rank], f64 payload, all
// little-endian, payload row-major. Gradients are never serialized.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

} // namespace d2c
