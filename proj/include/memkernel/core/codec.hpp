// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Canonical text encoding: JSON with sorted object keys, no insignificant
// whitespace, shortest round-trip float formatting, ISO-8601 timestamps,
// hex digests and base64 byte blobs. Equal values encode to equal bytes.

#include "memkernel/core/types.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace memkernel {

using Json = nlohmann::json;

void to_json(Json& j, const Timestamp& t);
void from_json(const Json& j, Timestamp& t);
void to_json(Json& j, const Digest& d);
void from_json(const Json& j, Digest& d);
void to_json(Json& j, const LifecycleState& s);
void from_json(const Json& j, LifecycleState& s);
void to_json(Json& j, const AccessPolicy& p);
void from_json(const Json& j, AccessPolicy& p);
void to_json(Json& j, const LifespanPolicy& p);
void from_json(const Json& j, LifespanPolicy& p);
void to_json(Json& j, const ProvenanceEvent& e);
void from_json(const Json& j, ProvenanceEvent& e);
void to_json(Json& j, const Compliance& c);
void from_json(const Json& j, Compliance& c);
void to_json(Json& j, const VersionRef& r);
void from_json(const Json& j, VersionRef& r);
void to_json(Json& j, const VersionRecord& r);
void from_json(const Json& j, VersionRecord& r);
void to_json(Json& j, const MemoryPayload& p);
void from_json(const Json& j, MemoryPayload& p);
void to_json(Json& j, const MetadataHeader& h);
void from_json(const Json& j, MetadataHeader& h);
void to_json(Json& j, const MemCube& c);
void from_json(const Json& j, MemCube& c);

std::string canonical_dump(const Json& j);

std::string canonical_encode(const MemCube& cube);
// Throws DecodeError with the failing byte offset (0 for schema errors that
// are not tied to a parse position).
MemCube canonical_decode(std::string_view bytes);

// Parses canonical JSON text; throws DecodeError.
Json parse_canonical(std::string_view bytes);

std::string canonical_payload(const MemoryPayload& payload);
Digest payload_digest(const MemoryPayload& payload);

}  // namespace memkernel
