#include "d2c/numcore/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "d2c/numcore/errors.hpp"

namespace d2c {
namespace {

constexpr std::array<char, 4> kMagic{'D', '2', 'C', 'T'};
constexpr std::uint32_t kMaxRank = 16;

template <typename U>
void put_le(std::ostream& out, U value) {
    std::array<char, sizeof(U)> bytes{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
    }
    out.write(bytes.data(), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) throw FormatError("truncated tensor file");
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        value |= static_cast<U>(bytes[i]) << (8 * i);
    }
    return value;
}

} // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    if (!out) throw IoError("failed writing tensor");
}

Tensor read_tensor(std::istream& in) {
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw FormatError("bad tensor magic (expected D2CT)");
    const auto rank = get_le<std::uint32_t>(in);
    if (rank > kMaxRank) throw FormatError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
        const auto dim = get_le<std::uint64_t>(in);
        if (dim > (std::numeric_limits<std::uint32_t>::max)()) {
            throw FormatError("implausible tensor dimension " + std::to_string(dim));
        }
        d = static_cast<std::size_t>(dim);
        count *= d;
    }
    std::vector<double> data(count);
    for (auto& v : data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
    if (in.peek() != std::char_traits<char>::eof()) {
        throw FormatError("trailing bytes after tensor payload");
    }
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return read_tensor(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace d2c
