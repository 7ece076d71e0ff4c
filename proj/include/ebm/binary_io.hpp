#pragma once

// Little-endian primitives shared by every binary format in the library.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ebm {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace io {

template <class UInt>
void put_le(std::ostream& out, UInt value) {
    std::array<char, sizeof(UInt)> bytes;
    for (std::size_t i = 0; i < sizeof(UInt); ++i)
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
    out.write(bytes.data(), bytes.size());
}

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }
inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_f64s(std::ostream& out, std::span<const double> values) {
    for (double v : values) put_f64(out, v);
}

inline void put_tag(std::ostream& out, std::string_view tag) { out.write(tag.data(), tag.size()); }

/// Reader that tracks the byte offset so errors can point at the failure.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::uint64_t offset() const noexcept { return offset_; }

    template <class UInt>
    UInt get_le(const char* what) {
        std::array<unsigned char, sizeof(UInt)> bytes;
        read(reinterpret_cast<char*>(bytes.data()), bytes.size(), what);
        UInt v = 0;
        for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
        return v;
    }

    std::uint8_t u8(const char* what) { return get_le<std::uint8_t>(what); }
    std::uint32_t u32(const char* what) { return get_le<std::uint32_t>(what); }
    double f64(const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

    void f64s(std::span<double> out, const char* what) {
        for (double& v : out) v = f64(what);
    }

    void expect_tag(std::string_view tag) {
        std::string got(tag.size(), '\0');
        read(got.data(), got.size(), "magic tag");
        if (got != tag)
            throw FormatError("bad magic tag: expected '" + std::string(tag) + "'");
    }

    void read(char* dst, std::size_t count, const char* what) {
        in_.read(dst, static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(in_.gcount()) != count)
            throw FormatError(std::string("truncated input while reading ") + what + " at byte offset " +
                              std::to_string(offset_ + static_cast<std::uint64_t>(in_.gcount())));
        offset_ += count;
    }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

}  // namespace io
}  // namespace ebm
