#pragma once

// consentchain/encode.hpp — canonical byte encoding.
//
// Every digest in the system is computed over bytes produced here. The rules
// are fixed: integers little-endian at declared width, strings and blobs
// length-prefixed (u32), lists count-prefixed (u32), sets sorted by their
// element identifier before encoding, struct fields in declaration order.
// Distinct logical values of one type encode to distinct byte sequences.

#include <cstdint>
#include <string>

#include "consentchain/bytes.hpp"

namespace consentchain {

class Encoder {
public:
    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }

    Encoder& u8(std::uint8_t v) {
        buf_.push_back(v);
        return *this;
    }

    Encoder& u16(std::uint16_t v) {
        buf_.push_back(static_cast<std::uint8_t>(v));
        buf_.push_back(static_cast<std::uint8_t>(v >> 8));
        return *this;
    }

    Encoder& u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }

    Encoder& u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        return *this;
    }

    Encoder& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }

    Encoder& str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
        return *this;
    }

    Encoder& blob(const Bytes& b) {
        u32(static_cast<std::uint32_t>(b.size()));
        buf_.insert(buf_.end(), b.begin(), b.end());
        return *this;
    }

    // Raw bytes, no length prefix. For fixed-width material (digests).
    Encoder& raw(const std::uint8_t* data, std::size_t len) {
        buf_.insert(buf_.end(), data, data + len);
        return *this;
    }

    Encoder& digest(const Digest& d) { return raw(d.raw.data(), d.raw.size()); }

    Encoder& count(std::size_t n) { return u32(static_cast<std::uint32_t>(n)); }

private:
    Bytes buf_;
};

} // namespace consentchain
