// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Shared fixtures and independent oracles for the test suites. Nothing in
// here calls into the code paths it is used to check.

#include "memkernel/core/cube.hpp"
#include "memkernel/core/ids.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace memkernel::testing {

inline Timestamp t0() { return Timestamp::from_seconds(1'735'689'600); }  // 2025-01-01T00:00:00Z

inline CubeDraft text_draft(const std::string& text, const std::string& ns = "clinic",
                            const Identity& owner = "alice")
{
    CubeDraft d;
    d.payload = PlaintextPayload{text, {}};
    d.namespace_name = ns;
    d.semantic_type = "fact";
    d.acl = AccessPolicy::private_to(owner);
    return d;
}

inline MemCube make_cube(IdGenerator& ids, const std::string& text, Timestamp now = t0(),
                         const std::string& ns = "clinic", const Identity& owner = "alice")
{
    CreateContext ctx;
    ctx.cube_id = ids.next(now);
    ctx.now = now;
    ctx.actor = owner;
    return create_cube(text_draft(text, ns, owner), ctx);
}

// Reference FNV-1a written from the published constants.
inline std::uint64_t oracle_fnv(const std::string& s)
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h = (h ^ c) * 1099511628211ULL;
    }
    return h;
}

// Reference fingerprint: per-character scan, explicit token multiset.
inline std::vector<double> oracle_fingerprint(const std::string& text, std::size_t dim = 256)
{
    std::map<std::string, int> multiset;
    std::string tok;
    auto flush = [&] {
        if (!tok.empty()) ++multiset[tok];
        tok.clear();
    };
    for (unsigned char c : text) {
        const bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 128;
        if (!alnum) {
            flush();
            continue;
        }
        tok.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c + 32 : c));
    }
    flush();
    std::vector<double> v(dim, 0.0);
    for (const auto& [t, n] : multiset) {
        const auto h = oracle_fnv(t);
        v[h % dim] += ((h >> 63) & 1U) ? -n : n;
    }
    double norm2 = 0;
    for (double x : v) norm2 += x * x;
    if (norm2 == 0) {
        v.assign(dim, 0.0);
        v[0] = 1.0;
        return v;
    }
    const double norm = std::sqrt(norm2);
    for (double& x : v) x /= norm;
    return v;
}

inline const std::vector<std::string>& vocabulary()
{
    static const std::vector<std::string> words{
        "budget", "meeting", "notes", "contract", "risk",  "clause",  "patient", "metformin", "dosage",
        "draft",  "review",  "policy", "quarter", "sales", "travel",  "report",  "insulin",   "allergy",
        "legal",  "finance", "audit",  "vendor",  "cloud", "mobile",  "summary", "diagnosis", "schedule"};
    return words;
}

inline std::string random_text(std::mt19937_64& rng, int min_words = 3, int max_words = 12)
{
    const auto& vocab = vocabulary();
    std::uniform_int_distribution<int> len(min_words, max_words);
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    std::string out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        if (i) out.push_back(' ');
        out += vocab[pick(rng)];
    }
    return out;
}

}  // namespace memkernel::testing
