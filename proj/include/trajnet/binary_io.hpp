// Little-endian binary readers/writers shared by the grid, dataset and model formats.
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "trajnet/error.hpp"

namespace trajnet::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
concept Scalar = std::is_arithmetic_v<T>;

template <Scalar T>
void write_le(std::ostream &os, T value) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::ranges::reverse(bytes);
    os.write(bytes.data(), sizeof(T));
}

template <Scalar T>
T read_le(std::istream &is) {
    std::array<char, sizeof(T)> bytes;
    if (!is.read(bytes.data(), sizeof(T))) throw FormatError("unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) std::ranges::reverse(bytes);
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline void write_magic(std::ostream &os, std::string_view magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream &is, std::string_view magic) {
    std::string got(magic.size(), '\0');
    if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic)
        throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
}

inline void expect_version(std::istream &is, std::uint32_t expected) {
    const auto v = read_le<std::uint32_t>(is);
    if (v != expected)
        throw FormatError("unsupported format version " + std::to_string(v) + " (expected " +
                          std::to_string(expected) + ")");
}

inline std::ofstream open_out(const std::string &path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_in(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    return is;
}

inline void finish_write(std::ostream &os, const std::string &path) {
    os.flush();
    if (!os) throw IoError("write failed: " + path);
}

} // namespace trajnet::io
