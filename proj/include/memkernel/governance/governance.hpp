// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "memkernel/core/codec.hpp"
#include "memkernel/core/fingerprint.hpp"
#include "memkernel/core/types.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

namespace memkernel {

struct CallContext {
    std::string session_id;
    std::string purpose;
    std::string platform;
    Timestamp time;

    bool operator==(const CallContext&) const = default;
};

enum class AccessOp { Read, Write, Export };

namespace deny_reason {
inline constexpr const char* kNotReader = "NOT_READER";
inline constexpr const char* kNotWriter = "NOT_WRITER";
inline constexpr const char* kReadOnly = "READ_ONLY";
inline constexpr const char* kFrozen = "FROZEN";
}  // namespace deny_reason

struct AccessDecision {
    bool allowed = false;
    std::string reason;  // empty when allowed

    static AccessDecision allow() { return {true, {}}; }
    static AccessDecision deny(std::string reason) { return {false, std::move(reason)}; }
    bool operator==(const AccessDecision&) const = default;
};

// The ternary decision (identity, object, context); pure. The owner is
// always allowed except for writes to a frozen cube.
AccessDecision decide_access(const Identity& actor, const MemCube& cube, const CallContext& ctx, AccessOp op);

enum class AuditOp { Create, Read, Update, Transition, Migrate, Export, Import, Publish, Pull, Deny };

std::string_view to_string(AuditOp op) noexcept;
AuditOp parse_audit_op(std::string_view s);

struct AuditRecord {
    std::uint64_t seq = 0;
    Timestamp at;
    Identity actor;
    CubeId cube_id;  // empty for calls not bound to one cube
    AuditOp op = AuditOp::Read;
    CallContext context;
    std::optional<MemoryKind> memory_kind;
    bool allowed = true;
    std::string reason;  // deny reason or error code
    std::string detail;  // API operation name and notes

    bool operator==(const AuditRecord&) const = default;
};

void to_json(Json& j, const CallContext& c);
void from_json(const Json& j, CallContext& c);
void to_json(Json& j, const AuditRecord& r);
void from_json(const Json& j, AuditRecord& r);

struct AuditFilter {
    std::optional<Timestamp> from;  // inclusive
    std::optional<Timestamp> to;    // exclusive
    std::optional<Identity> actor;
    std::optional<CubeId> cube_id;
    std::optional<AuditOp> op;
    std::optional<MemoryKind> memory_kind;

    bool matches(const AuditRecord& r) const;
};

// Append-only, totally ordered audit trail. Sequence numbers are gapless from
// 1 even under concurrent appenders. With a backing file every record is
// written as one canonical line before append() returns.
class AuditLog {
public:
    AuditLog() = default;
    // Replays an existing file; a torn trailing line is discarded and truncated.
    explicit AuditLog(std::filesystem::path file);

    AuditLog(const AuditLog&) = delete;
    AuditLog& operator=(const AuditLog&) = delete;

    std::uint64_t append(AuditRecord record);
    std::vector<AuditRecord> query(const AuditFilter& filter) const;
    std::vector<AuditRecord> records() const;
    std::uint64_t size() const;
    std::uint64_t last_seq() const;

private:
    mutable std::mutex mu_;
    std::vector<AuditRecord> records_;
    std::optional<std::filesystem::path> file_;
    std::ofstream out_;
};

// Redaction rules: regexes applied to every free-text field, plus sensitivity
// tags that mask a cube's whole text.
struct SensitivityRule {
    std::string id;
    std::string pattern;  // ECMAScript regex
    bool operator==(const SensitivityRule&) const = default;
};

struct SensitivityRuleset {
    std::string id = "none";
    std::vector<SensitivityRule> rules;
    std::set<std::string> mask_whole_text_tags;
    bool operator==(const SensitivityRuleset&) const = default;
};

void to_json(Json& j, const SensitivityRuleset& r);
void from_json(const Json& j, SensitivityRuleset& r);

inline constexpr std::string_view kMaskToken = "\xE2\x96\xA9";  // U+25A9

class Redactor {
public:
    // Throws Error(InvalidConfig) for bad regexes or rules that match the mask token.
    explicit Redactor(SensitivityRuleset ruleset = {});

    const SensitivityRuleset& ruleset() const { return ruleset_; }
    std::string redact_text(std::string_view text) const;
    bool matches_any(std::string_view text) const;

    // Masked copy; the original is untouched. The copy's fingerprint and
    // head snapshot digest are refreshed so it still validates. Idempotent.
    MemCube redact(const MemCube& cube, const Embedder& embedder = default_embedder()) const;

private:
    SensitivityRuleset ruleset_;
    std::vector<std::regex> compiled_;
};

Digest watermark_digest(std::string_view provider_id, const Digest& snapshot, std::string_view salt);
// Stamps compliance.watermark; throws FrozenViolation.
MemCube apply_watermark(const MemCube& cube, const std::string& provider_id, const std::string& salt);
bool verify_watermark(const MemCube& cube);
bool verify_watermark(const Digest& watermark, std::string_view provider_id, const MemCube& cube);

}  // namespace memkernel
