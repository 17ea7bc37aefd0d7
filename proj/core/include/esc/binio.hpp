#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "esc/error.hpp"
#include "esc/tensor.hpp"

// Little helpers for the checkpoint format. Native byte order; the files
// are not meant to travel between architectures.
namespace esc::binio {

template <class T>
    requires std::is_trivially_copyable_v<T>
void write(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
    requires std::is_trivially_copyable_v<T>
T read(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("unexpected end of binary stream");
    return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
    write<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
    const auto n = read<std::uint64_t>(in);
    if (n > (1ull << 32)) throw FormatError("string length out of range");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw FormatError("unexpected end of binary stream");
    return s;
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    write<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
}

inline Matrix read_matrix(std::istream& in) {
    const auto r = read<std::uint64_t>(in);
    const auto c = read<std::uint64_t>(in);
    if (r > (1ull << 31) || c > (1ull << 31)) throw FormatError("matrix shape out of range");
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw FormatError("unexpected end of binary stream");
    return m;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::string(buf, 4) != std::string(magic, 4))
        throw FormatError(std::string("bad section magic, expected ") + magic);
}

} // namespace esc::binio
