#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace delaudit {

// Byte strings double as payloads, tokens and canonical state encodings.
using Bytes = std::string;

inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(static_cast<char>((v >> shift) & 0xff));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8)
        out.push_back(static_cast<char>((v >> shift) & 0xff));
}

// Length-prefixed byte string; the prefix makes concatenations unambiguous,
// which is what "canonical serialization" relies on throughout.
inline void put_bstr(Bytes& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

struct ByteReader {
    std::string_view data;
    std::size_t pos = 0;

    bool done() const { return pos >= data.size(); }
    std::size_t remaining() const { return data.size() - pos; }

    std::uint8_t u8() {
        check(1);
        return static_cast<std::uint8_t>(data[pos++]);
    }
    std::uint32_t u32() {
        check(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(data[pos++]);
        return v;
    }
    std::uint64_t u64() {
        check(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | static_cast<std::uint8_t>(data[pos++]);
        return v;
    }
    Bytes bstr() {
        std::uint32_t n = u32();
        check(n);
        Bytes s(data.substr(pos, n));
        pos += n;
        return s;
    }

    void check(std::size_t n) const {
        if (pos + n > data.size()) throw std::out_of_range("byte reader underrun");
    }
};

inline std::string to_hex(std::string_view s) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(s.size() * 2);
    for (unsigned char c : s) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace delaudit
