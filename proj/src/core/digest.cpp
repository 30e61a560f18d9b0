// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/digest.hpp"

#include "memkernel/core/errors.hpp"

#include <openssl/evp.h>

namespace memkernel {

std::string Digest::hex() const
{
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (const auto b : bytes) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xF]);
    }
    return out;
}

Digest Digest::from_hex(std::string_view hex)
{
    if (hex.size() != 64) {
        throw Error(ErrorCode::BadArgs, "digest must be 64 hex characters");
    }
    const auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Digest d;
    for (std::size_t i = 0; i < 32; ++i) {
        const int hi = nibble(hex[2 * i]);
        const int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            throw Error(ErrorCode::BadArgs, "digest contains non-hex character");
        }
        d.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return d;
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new())
{
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Internal, "sha256 init failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(std::string_view data)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
    return *this;
}

Sha256& Sha256::update(std::span<const std::uint8_t> data)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
    return *this;
}

Digest Sha256::finish()
{
    Digest d;
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), d.bytes.data(), &len);
    return d;
}

Digest sha256(std::span<const std::uint8_t> data) { return Sha256{}.update(data).finish(); }

Digest sha256(std::string_view data) { return Sha256{}.update(data).finish(); }

std::string base64_encode(std::span<const std::uint8_t> data)
{
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text)
{
    if (text.size() % 4 != 0) {
        throw Error(ErrorCode::BadArgs, "base64 length must be a multiple of 4");
    }
    std::vector<std::uint8_t> out(3 * (text.size() / 4));
    if (text.empty()) {
        return out;
    }
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                  static_cast<int>(text.size()));
    if (n < 0) {
        throw Error(ErrorCode::BadArgs, "invalid base64");
    }
    std::size_t len = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
    if (text.back() == '=') --len;
    if (text.size() >= 2 && text[text.size() - 2] == '=') --len;
    out.resize(len);
    return out;
}

}  // namespace memkernel
