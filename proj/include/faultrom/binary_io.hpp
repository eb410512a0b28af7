#pragma once

// Little-endian record helpers shared by the binary artifact formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "faultrom/error.hpp"

namespace faultrom::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written natively; big-endian hosts need byte swapping");

template <typename T>
void put(std::ostream& os, const T& value) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void put_span(std::ostream& os, std::span<const T> values) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size_bytes()));
}

inline void put_magic(std::ostream& os, std::string_view magic) {
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

template <typename T>
T get(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw ConfigError("truncated binary record");
    return value;
}

template <typename T>
void get_span(std::istream& is, std::span<T> out) {
    is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size_bytes()));
    if (!is) throw ConfigError("truncated binary record");
}

inline void expect_magic(std::istream& is, std::string_view magic) {
    std::array<char, 4> buf{};
    is.read(buf.data(), 4);
    if (!is || std::string_view(buf.data(), 4) != magic)
        throw ConfigError("bad magic, expected " + std::string(magic));
}

}  // namespace faultrom::io
