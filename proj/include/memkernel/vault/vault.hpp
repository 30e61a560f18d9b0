// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// MemVault: namespaced cube storage over a pluggable adapter, with hot/cold
// tiers and every historic version retained for rollback.
//
// FileLog layout (one file per namespace, <directory>/<name>.mklog):
//
//   record := u32 big-endian body length | u8 kind | body (canonical JSON)
//   kind   := 0 manifest (first record) | 1 put (full cube) | 2 tier {id, tier}

#include "memkernel/core/codec.hpp"
#include "memkernel/core/types.hpp"
#include "memkernel/governance/governance.hpp"
#include "memkernel/lifecycle/lifecycle.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

namespace memkernel {

enum class NamespaceKind { UserPrivate, ExpertKnowledge, IndustryShared, ContextPool, PipelineCache };
enum class BackendKind { InMemory, FileLog };
enum class FlushMode { EveryWrite, Periodic };
enum class NamespaceMode { ReadOnlyCache, WriteEnabled };
enum class Tier { Hot, Cold };

std::string_view to_string(NamespaceKind k) noexcept;
std::string_view to_string(BackendKind k) noexcept;
std::string_view to_string(FlushMode k) noexcept;
std::string_view to_string(NamespaceMode k) noexcept;
std::string_view to_string(Tier t) noexcept;
NamespaceKind parse_namespace_kind(std::string_view s);
BackendKind parse_backend_kind(std::string_view s);
NamespaceMode parse_namespace_mode(std::string_view s);
Tier parse_tier(std::string_view s);

struct AdapterConfig {
    BackendKind backend = BackendKind::InMemory;
    std::filesystem::path directory;  // FileLog only
    FlushMode flush = FlushMode::EveryWrite;
    double flush_seconds = 0;  // Periodic only
    bool operator==(const AdapterConfig&) const = default;
};

struct NamespaceDescriptor {
    std::string name;
    NamespaceKind kind = NamespaceKind::UserPrivate;
    AdapterConfig adapter;
    NamespaceMode mode = NamespaceMode::WriteEnabled;
    std::optional<std::size_t> capacity_cubes;
    bool operator==(const NamespaceDescriptor&) const = default;
};

void to_json(Json& j, const AdapterConfig& a);
void from_json(const Json& j, AdapterConfig& a);
void to_json(Json& j, const NamespaceDescriptor& d);
void from_json(const Json& j, NamespaceDescriptor& d);

enum class LogKind : std::uint8_t { Manifest = 0, Put = 1, Tier = 2 };

struct LogRecord {
    LogKind kind = LogKind::Put;
    std::string body;  // canonical JSON
    bool operator==(const LogRecord&) const = default;
};

// Adapter contract: an ordered record store that can be replayed.
class StorageAdapter {
public:
    virtual ~StorageAdapter() = default;
    virtual void append(const LogRecord& record) = 0;
    virtual std::vector<LogRecord> replay() = 0;
    virtual void flush() = 0;
    // Atomically replaces the stored records with `records`.
    virtual void rewrite(const std::vector<LogRecord>& records) = 0;
    virtual std::size_t record_count() const = 0;
};

class InMemoryAdapter final : public StorageAdapter {
public:
    void append(const LogRecord& record) override { records_.push_back(record); }
    std::vector<LogRecord> replay() override { return records_; }
    void flush() override {}
    void rewrite(const std::vector<LogRecord>& records) override { records_ = records; }
    std::size_t record_count() const override { return records_.size(); }

private:
    std::vector<LogRecord> records_;
};

std::string encode_log_record(const LogRecord& r);

struct LogScan {
    std::vector<LogRecord> records;
    std::uint64_t valid_bytes = 0;       // length of the well-formed prefix
    std::optional<std::uint64_t> torn;   // offset of the first bad record
};

// Splits raw log bytes into records; stops at the first incomplete record.
LogScan scan_log(std::string_view bytes);

class FileLogAdapter final : public StorageAdapter {
public:
    // Strict mode throws CorruptLog(offset) on a torn tail; recover mode
    // truncates the file to its well-formed prefix instead.
    FileLogAdapter(std::filesystem::path file, FlushMode flush, double flush_seconds, bool recover);
    ~FileLogAdapter() override;

    void append(const LogRecord& record) override;
    std::vector<LogRecord> replay() override;
    void flush() override;
    void rewrite(const std::vector<LogRecord>& records) override;
    std::size_t record_count() const override { return count_; }
    const std::filesystem::path& file() const { return file_; }

private:
    std::filesystem::path file_;
    FlushMode flush_;
    double flush_seconds_;
    std::vector<LogRecord> initial_;
    std::FILE* out_ = nullptr;
    std::size_t count_ = 0;
    std::chrono::steady_clock::time_point last_flush_;
};

struct StoredCube {
    MemCube cube;  // latest version
    Tier tier = Tier::Hot;
};

// One namespace: a single logical writer, concurrent readers.
class Namespace {
public:
    Namespace(NamespaceDescriptor desc, std::unique_ptr<StorageAdapter> adapter);

    const NamespaceDescriptor& descriptor() const { return desc_; }

    // Stores `cube` as the new latest state. The incoming chain must extend the
    // stored one (same chain for header-only updates); throws VersionConflict.
    std::uint64_t put(const MemCube& cube);
    std::optional<StoredCube> find(const CubeId& id) const;
    std::optional<MemCube> at_version(const CubeId& id, std::uint64_t version) const;
    std::vector<CubeId> ids() const;
    std::vector<StoredCube> snapshot() const;
    bool contains(const CubeId& id) const;
    std::size_t size() const;
    // Cubes counted against capacity: everything not Archived or Expired.
    std::size_t occupancy() const;

    // Throws UnknownCube / IllegalTier; verifies the payload digest.
    void migrate_tier(const CubeId& id, Tier target);

    void flush();
    // Latest-record-wins rewrite: one put per (cube, version) and the current tier.
    void compact();
    std::size_t log_records() const;

private:
    void apply(const LogRecord& r, bool replaying);
    void write(LogRecord r);
    LogRecord manifest() const;

    NamespaceDescriptor desc_;
    std::unique_ptr<StorageAdapter> adapter_;
    mutable std::shared_mutex mu_;
    std::map<CubeId, StoredCube> latest_;
    std::map<CubeId, std::map<std::uint64_t, MemCube>> versions_;
};

// Tier a state forces or defaults to when it is entered, if any.
std::optional<Tier> tier_for_state(const LifecycleState& s) noexcept;

class Vault final : public PayloadHistory {
public:
    explicit Vault(std::set<Identity> admins = {}, bool recover = false);

    // Idempotent: reopening with the same descriptor returns the open namespace.
    // A different descriptor under an open name is InvalidConfig.
    Namespace& open_namespace(const NamespaceDescriptor& desc);
    Namespace& ns(const std::string& name);  // throws UnknownNamespace
    const Namespace& ns(const std::string& name) const;
    bool has_namespace(const std::string& name) const;
    std::vector<std::string> namespace_names() const;
    bool is_admin(const Identity& actor) const { return admins_.contains(actor); }

    // Governed operations. Throw AccessDenied (detail is the deny reason),
    // ReadOnlyNamespace, UnknownCube, UnknownNamespace, VersionConflict.
    std::uint64_t put(const std::string& ns, const MemCube& cube, const Identity& actor, const CallContext& ctx);
    MemCube get(const std::string& ns, const CubeId& id, const Identity& actor, const CallContext& ctx) const;
    std::vector<CubeId> list(const std::string& ns, const std::function<bool(const MemCube&)>& filter,
                             const Identity& actor, const CallContext& ctx) const;
    void migrate_tier(const std::string& ns, const CubeId& id, Tier target);

    // Ungoverned system path used by the kernel after it has checked access.
    std::uint64_t store(const MemCube& cube);

    std::optional<std::string> namespace_of(const CubeId& id) const;
    std::optional<StoredCube> find(const CubeId& id) const;
    std::vector<StoredCube> all() const;
    std::optional<MemoryPayload> payload_at(const CubeId& id, std::uint64_t version) const override;
    void flush_all();

private:
    std::set<Identity> admins_;
    bool recover_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::unique_ptr<Namespace>> namespaces_;
    std::map<CubeId, std::string> home_;
};

}  // namespace memkernel
