#pragma once

#include "fdrl/error.hpp"
#include "fdrl/random.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace fdrl::detail {

template <class T>
    requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream &out, const T &value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <class T>
    requires std::is_trivially_copyable_v<T>
T read_pod(std::istream &in) {
    T value{};
    in.read(reinterpret_cast<char *>(&value), sizeof(T));
    if (!in) throw ParseError("truncated state stream");
    return value;
}

inline void write_doubles(std::ostream &out, const std::vector<double> &v) {
    write_pod<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_doubles(std::istream &in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw ParseError("implausible vector length in state stream");
    std::vector<double> v(n);
    in.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("truncated state stream");
    return v;
}

inline void write_string(std::ostream &out, const std::string &s) {
    write_pod<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream &in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1ULL << 30)) throw ParseError("implausible string length in state stream");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw ParseError("truncated state stream");
    return s;
}

inline void write_rng(std::ostream &out, const Rng &rng) {
    std::ostringstream text;
    text << rng;
    write_string(out, text.str());
}

inline void read_rng(std::istream &in, Rng &rng) {
    std::istringstream text(read_string(in));
    text >> rng;
    if (!text) throw ParseError("corrupt RNG state");
}

} // namespace fdrl::detail
