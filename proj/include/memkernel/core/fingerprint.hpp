// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "memkernel/core/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memkernel {

// Lowercased ASCII tokens split on non-alphanumeric bytes. Bytes >= 0x80 are
// kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// Whitespace tokens, the vocabulary of the mock inference engine and the
// unit in which injection budgets are counted.
std::vector<std::string> whitespace_tokens(std::string_view text);
std::uint64_t token_count(std::string_view text);

std::uint64_t fnv1a64(std::string_view data) noexcept;

// Signed-hash bag of words: token t adds sign(bit 63 of h(t)) to bucket
// h(t) mod dim, then the accumulation is L2-normalized. An all-zero
// accumulation maps to the basis vector e_0.
Fingerprint hashed_fingerprint(std::string_view text, std::size_t dim = kFingerprintDim);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Pluggable text embedder; the default is the hashed bag of words above.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual Fingerprint embed(std::string_view text) const = 0;
};

class HashedBagOfWords final : public Embedder {
public:
    explicit HashedBagOfWords(std::size_t dim = kFingerprintDim) : dim_(dim) {}

    std::string id() const override { return "hashed-bow-v1"; }
    std::size_t dimension() const override { return dim_; }
    Fingerprint embed(std::string_view text) const override { return hashed_fingerprint(text, dim_); }

private:
    std::size_t dim_;
};

const Embedder& default_embedder();

}  // namespace memkernel
