// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/fingerprint.hpp"

#include <cmath>

namespace memkernel {

namespace {

bool is_token_byte(unsigned char c)
{
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> out;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_token_byte(c)) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

std::vector<std::string> whitespace_tokens(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            out.emplace_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::uint64_t token_count(std::string_view text) { return whitespace_tokens(text).size(); }

std::uint64_t fnv1a64(std::string_view data) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

Fingerprint hashed_fingerprint(std::string_view text, std::size_t dim)
{
    Fingerprint v(dim, 0.0);
    for (const auto& token : tokenize(text)) {
        const std::uint64_t h = fnv1a64(token);
        v[h % dim] += (h >> 63) != 0 ? -1.0 : 1.0;
    }
    const double norm = l2_norm(v);
    if (norm == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
        return v;
    }
    for (auto& x : v) {
        x /= norm;
    }
    return v;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    const std::size_t n = std::min(a.size(), b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

const Embedder& default_embedder()
{
    static const HashedBagOfWords embedder;
    return embedder;
}

}  // namespace memkernel
