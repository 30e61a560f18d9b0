// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// MemLoader/MemDumper archives and the MemStore exchange.
//
// Archive file layout (all lengths u32 big-endian):
//
//   "memkernel-archive/1\n"
//   [len][manifest: canonical JSON]
//   [len][entry: canonical JSON {"cube": ..., "permissions": ...}]   x cube_count
//   [len][audit excerpt: canonical JSON array]
//
// Nothing may follow the audit section.

#include "memkernel/core/codec.hpp"
#include "memkernel/core/fingerprint.hpp"
#include "memkernel/core/ids.hpp"
#include "memkernel/core/types.hpp"
#include "memkernel/governance/governance.hpp"
#include "memkernel/operator/operator.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace memkernel {

inline constexpr std::uint32_t kArchiveFormatVersion = 1;
inline constexpr std::string_view kArchiveMagicPrefix = "memkernel-archive/";

struct ArchiveManifest {
    std::uint32_t format_version = kArchiveFormatVersion;
    Timestamp created_at;
    std::string source_deployment;
    std::string digest_algorithm = "sha256";
    std::uint64_t cube_count = 0;
    std::string ruleset_id;
    bool operator==(const ArchiveManifest&) const = default;
};

struct ArchiveEntry {
    MemCube cube;      // redacted
    Json permissions;  // {"acl", "layer", "exported_by"}
    bool operator==(const ArchiveEntry&) const = default;
};

struct Archive {
    ArchiveManifest manifest;
    std::vector<ArchiveEntry> entries;
    std::vector<AuditRecord> audit;  // redacted excerpt, may be empty
    bool operator==(const Archive&) const = default;
};

void to_json(Json& j, const ArchiveManifest& m);
void from_json(const Json& j, ArchiveManifest& m);

std::string encode_archive(const Archive& archive);
// Throws DecodeError, Error(UnsupportedVersion), Error(ManifestMismatch).
Archive decode_archive(std::string_view bytes);

struct DumpPolicy {
    bool include_audit = false;
};

// Builds an archive of redacted copies. `audit` supplies the excerpt when the
// policy asks for one. Throws Error(ValidationFailed) if any rule still
// matches the encoded bytes.
std::string build_archive(std::span<const MemCube> cubes, const Redactor& redactor, const std::string& deployment,
                          const Identity& actor, Timestamp now, std::span<const AuditRecord> audit,
                          const Embedder& embedder = default_embedder());

// Reference recorded in the Import version record of a loaded cube.
std::string import_reference(const std::string& deployment, const CubeId& id);

// Fresh cubes for every archive entry: new id, target namespace, Generated
// state, a single Import version record and an "import" provenance event.
// Throws Error(ValidationFailed) naming the first invalid entry index.
std::vector<MemCube> import_archive(const Archive& archive, const std::string& target_namespace, IdGenerator& ids,
                                    const Identity& actor, Timestamp now);

// ---- MemStore exchange ----

enum class VisibilityKind { Public, Allowlist };
enum class DeliveryMode { Push, Pull };

std::string_view to_string(VisibilityKind v) noexcept;
std::string_view to_string(DeliveryMode d) noexcept;
VisibilityKind parse_visibility_kind(std::string_view s);
DeliveryMode parse_delivery_mode(std::string_view s);

struct Visibility {
    VisibilityKind kind = VisibilityKind::Public;
    std::set<Identity> allow;
    bool admits(const Identity& actor) const;
    bool operator==(const Visibility&) const = default;
};

struct License {
    std::optional<std::uint64_t> max_calls;  // per subscriber
    std::optional<Timestamp> expires_at;
    std::optional<std::string> fee_token;
    void check() const;  // throws Error(BadArgs)
    bool operator==(const License&) const = default;
};

struct Listing {
    std::string listing_id;
    MemCube snapshot;  // redacted
    Visibility visibility;
    License license;
    Identity publisher;
    Timestamp published_at;
    bool operator==(const Listing&) const = default;
};

struct Subscription {
    std::string subscription_id;
    Identity subscriber;
    StructuredFilter filter;
    std::optional<std::string> semantic_query;
    double min_similarity = 0.25;
    DeliveryMode delivery = DeliveryMode::Push;
    Timestamp created_at;

    bool has_criterion() const;
    bool matches(const Listing& listing, const Embedder& embedder) const;
    bool operator==(const Subscription&) const = default;
};

struct Delivery {
    std::string subscription_id;
    std::string listing_id;
    Identity subscriber;
    DeliveryMode mode = DeliveryMode::Push;
    auto operator<=>(const Delivery&) const = default;
};

struct PullReceipt {
    MemCube snapshot;
    std::uint64_t call_number = 0;  // 1-based, per (listing, subscriber)
    std::optional<std::uint64_t> max_calls;
};

void to_json(Json& j, const Visibility& v);
void from_json(const Json& j, Visibility& v);
void to_json(Json& j, const License& l);
void from_json(const Json& j, License& l);
void to_json(Json& j, const Listing& l);
void from_json(const Json& j, Listing& l);
void to_json(Json& j, const Subscription& s);
void from_json(const Json& j, Subscription& s);
void to_json(Json& j, const Delivery& d);
void from_json(const Json& j, Delivery& d);

// Listings, subscriptions, license counters and delivery keys. With a file,
// every mutation is appended as one canonical line and replayed on open.
class Exchange {
public:
    explicit Exchange(const Embedder& embedder = default_embedder());
    Exchange(std::filesystem::path file, const Embedder& embedder = default_embedder());

    Exchange(const Exchange&) = delete;
    Exchange& operator=(const Exchange&) = delete;

    void publish(Listing listing);  // throws Error(BadArgs) on a duplicate id or invalid license
    std::string subscribe(Subscription subscription);  // throws Error(BadArgs) without criteria

    // Deliveries not made before for this listing; replays return nothing new.
    std::vector<Delivery> notify(const std::string& listing_id);

    // Atomic admission, expiry and counter check-and-increment.
    // Throws UnknownListing, AccessDenied, LicenseExpired, LicenseExhausted.
    PullReceipt pull(const std::string& listing_id, const Identity& actor, Timestamp now,
                     const std::optional<std::string>& fee_token);

    std::optional<Listing> listing(const std::string& id) const;
    std::vector<Listing> listings() const;
    std::optional<Subscription> subscription(const std::string& id) const;
    // Listings delivered to a Pull subscription, in delivery order.
    std::vector<std::string> inbox(const std::string& subscription_id) const;  // throws UnknownSubscription
    std::vector<Delivery> deliveries() const;
    std::uint64_t calls(const std::string& listing_id, const Identity& actor) const;

private:
    void apply(const Json& line);
    void log(const Json& line);

    const Embedder* embedder_;
    mutable std::mutex mu_;
    std::map<std::string, Listing> listings_;
    std::map<std::string, Subscription> subscriptions_;
    std::map<std::pair<std::string, Identity>, std::uint64_t> counters_;
    std::set<std::pair<std::string, std::string>> delivered_;  // (listing, subscription)
    std::vector<Delivery> deliveries_;
    std::map<std::string, std::vector<std::string>> inbox_;
    std::optional<std::filesystem::path> file_;
    std::ofstream out_;
    std::uint64_t next_sub_ = 1;
};

}  // namespace memkernel
