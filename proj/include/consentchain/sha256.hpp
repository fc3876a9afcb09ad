#pragma once

// consentchain/sha256.hpp — the project-wide 256-bit hash (SHA-256 via OpenSSL).

#include <openssl/evp.h>

#include <stdexcept>

#include "consentchain/bytes.hpp"

namespace consentchain {

inline Digest sha256(const std::uint8_t* data, std::size_t len) {
    Digest out;
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, out.raw.data(), &out_len, EVP_sha256(), nullptr) != 1 || out_len != 32) {
        throw std::runtime_error("sha256 failed");
    }
    return out;
}

inline Digest sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

inline Digest sha256(const std::string& data) {
    return sha256(reinterpret_cast<const std::uint8_t*>(data.data()), data.size());
}

} // namespace consentchain
