#pragma once

// consentchain/bytes.hpp — byte buffers, 32-byte digests, hex rendering.

#include <array>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace consentchain {

using Bytes = std::vector<std::uint8_t>;

// 32-byte digest. Rendered as 64 lowercase hex characters.
struct Digest {
    std::array<std::uint8_t, 32> raw{};

    bool operator==(const Digest&) const = default;
    auto operator<=>(const Digest&) const = default;

    static Digest zero() { return Digest{}; }

    std::string hex() const {
        static const char* k = "0123456789abcdef";
        std::string out;
        out.reserve(64);
        for (std::uint8_t b : raw) {
            out.push_back(k[b >> 4]);
            out.push_back(k[b & 0x0f]);
        }
        return out;
    }

    static Digest from_hex(const std::string& s) {
        if (s.size() != 64) throw std::invalid_argument("digest hex must be 64 chars");
        Digest d;
        for (std::size_t i = 0; i < 32; ++i) {
            d.raw[i] = static_cast<std::uint8_t>(std::stoul(s.substr(2 * i, 2), nullptr, 16));
        }
        return d;
    }
};

inline std::string to_hex(const Bytes& b) {
    static const char* k = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (std::uint8_t c : b) {
        out.push_back(k[c >> 4]);
        out.push_back(k[c & 0x0f]);
    }
    return out;
}

inline Bytes from_hex(const std::string& s) {
    if (s.size() % 2 != 0) throw std::invalid_argument("hex string must have even length");
    Bytes out(s.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::stoul(s.substr(2 * i, 2), nullptr, 16));
    }
    return out;
}

} // namespace consentchain
