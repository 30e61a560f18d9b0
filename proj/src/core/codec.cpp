// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/codec.hpp"

#include "memkernel/core/errors.hpp"

namespace memkernel {

void to_json(Json& j, const Timestamp& t) { j = format_iso8601(t); }

void from_json(const Json& j, Timestamp& t) { t = parse_iso8601(j.get<std::string>()); }

void to_json(Json& j, const Digest& d) { j = d.hex(); }

void from_json(const Json& j, Digest& d) { d = Digest::from_hex(j.get<std::string>()); }

void to_json(Json& j, const LifecycleState& s)
{
    j = Json{{"kind", to_string(s.kind)}};
    if (s.is_frozen()) {
        j["prior"] = to_string(s.prior);
    }
}

void from_json(const Json& j, LifecycleState& s)
{
    const StateKind kind = parse_state_kind(j.at("kind").get<std::string>());
    if (kind == StateKind::Frozen) {
        s = LifecycleState::frozen(parse_state_kind(j.at("prior").get<std::string>()));
    } else {
        s = LifecycleState::of(kind);
    }
}

void to_json(Json& j, const AccessPolicy& p)
{
    j = Json{{"owner", p.owner},
             {"readers", p.readers},
             {"readers_wildcard", p.readers_wildcard},
             {"writers", p.writers},
             {"share_scope", to_string(p.share_scope)}};
}

void from_json(const Json& j, AccessPolicy& p)
{
    p.owner = j.at("owner").get<std::string>();
    p.readers = j.at("readers").get<std::set<std::string>>();
    p.readers_wildcard = j.at("readers_wildcard").get<bool>();
    p.writers = j.at("writers").get<std::set<std::string>>();
    p.share_scope = parse_share_scope(j.at("share_scope").get<std::string>());
}

void to_json(Json& j, const LifespanPolicy& p)
{
    j = Json{{"mode", to_string(p.mode)}, {"seconds", p.seconds}};
    if (p.archive_after_idle_seconds) {
        j["archive_after_idle_seconds"] = *p.archive_after_idle_seconds;
    }
}

void from_json(const Json& j, LifespanPolicy& p)
{
    p.mode = parse_lifespan_mode(j.at("mode").get<std::string>());
    p.seconds = j.at("seconds").get<std::int64_t>();
    p.archive_after_idle_seconds.reset();
    if (j.contains("archive_after_idle_seconds")) {
        p.archive_after_idle_seconds = j.at("archive_after_idle_seconds").get<std::int64_t>();
    }
}

void to_json(Json& j, const ProvenanceEvent& e)
{
    j = Json{{"trigger", e.trigger}, {"context", e.context},   {"model_id", e.model_id},
             {"external_links", e.external_links}, {"actor", e.actor}, {"at", e.at}};
}

void from_json(const Json& j, ProvenanceEvent& e)
{
    e.trigger = j.at("trigger").get<std::string>();
    e.context = j.at("context").get<std::string>();
    e.model_id = j.at("model_id").get<std::string>();
    e.external_links = j.at("external_links").get<std::vector<std::string>>();
    e.actor = j.at("actor").get<std::string>();
    e.at = j.at("at").get<Timestamp>();
}

void to_json(Json& j, const Compliance& c)
{
    j = Json{{"sensitivity", c.sensitivity}, {"provenance_id", c.provenance_id}, {"lineage", c.lineage}};
    if (c.watermark) {
        j["watermark"] = Json{{"digest", c.watermark->digest},
                              {"provider_id", c.watermark->provider_id},
                              {"salt", c.watermark->salt}};
    }
}

void from_json(const Json& j, Compliance& c)
{
    c.sensitivity = j.at("sensitivity").get<std::set<std::string>>();
    c.provenance_id = j.at("provenance_id").get<std::string>();
    c.lineage = j.at("lineage").get<std::vector<ProvenanceEvent>>();
    c.watermark.reset();
    if (j.contains("watermark")) {
        const auto& w = j.at("watermark");
        c.watermark = Watermark{w.at("digest").get<Digest>(), w.at("provider_id").get<std::string>(),
                                w.at("salt").get<std::string>()};
    }
}

void to_json(Json& j, const VersionRef& r) { j = Json{{"cube_id", r.cube_id}, {"version", r.version}}; }

void from_json(const Json& j, VersionRef& r)
{
    r.cube_id = j.at("cube_id").get<std::string>();
    r.version = j.at("version").get<std::uint64_t>();
}

void to_json(Json& j, const VersionRecord& r)
{
    j = Json{{"version", r.version},          {"parents", r.parents}, {"op", to_string(r.op)},
             {"actor", r.actor},              {"at", r.at},           {"snapshot_digest", r.snapshot_digest},
             {"label", r.label}};
}

void from_json(const Json& j, VersionRecord& r)
{
    r.version = j.at("version").get<std::uint64_t>();
    r.parents = j.at("parents").get<std::vector<VersionRef>>();
    r.op = parse_version_op(j.at("op").get<std::string>());
    r.actor = j.at("actor").get<std::string>();
    r.at = j.at("at").get<Timestamp>();
    r.snapshot_digest = j.at("snapshot_digest").get<Digest>();
    r.label = j.at("label").get<std::string>();
}

void to_json(Json& j, const MemoryPayload& p)
{
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, PlaintextPayload>) {
                Json refs = Json::array();
                for (const auto& r : v.graph_refs) {
                    refs.push_back(Json{{"relation", r.relation}, {"target", r.target}});
                }
                j = Json{{"kind", "Plaintext"}, {"text", v.text}, {"graph_refs", refs}};
            } else if constexpr (std::is_same_v<T, ActivationPayload>) {
                j = Json{{"kind", "Activation"},
                         {"source_cube", v.source_cube},
                         {"token_count", v.token_count},
                         {"engine_tag", v.engine_tag},
                         {"kv_state", base64_encode(v.kv_state)}};
            } else {
                j = Json{{"kind", "Parameter"},
                         {"target_module", v.target_module},
                         {"rank", v.rank},
                         {"blob_digest", v.blob_digest},
                         {"provenance_note", v.provenance_note}};
            }
        },
        p);
}

void from_json(const Json& j, MemoryPayload& p)
{
    const auto kind = parse_memory_kind(j.at("kind").get<std::string>());
    switch (kind) {
    case MemoryKind::Plaintext: {
        PlaintextPayload v;
        v.text = j.at("text").get<std::string>();
        for (const auto& r : j.at("graph_refs")) {
            v.graph_refs.push_back(GraphRef{r.at("relation").get<std::string>(), r.at("target").get<std::string>()});
        }
        p = std::move(v);
        break;
    }
    case MemoryKind::Activation: {
        ActivationPayload v;
        v.source_cube = j.at("source_cube").get<std::string>();
        v.token_count = j.at("token_count").get<std::uint64_t>();
        v.engine_tag = j.at("engine_tag").get<std::string>();
        v.kv_state = base64_decode(j.at("kv_state").get<std::string>());
        p = std::move(v);
        break;
    }
    case MemoryKind::Parameter: {
        ParameterDeltaPayload v;
        v.target_module = j.at("target_module").get<std::string>();
        v.rank = j.at("rank").get<std::uint32_t>();
        v.blob_digest = j.at("blob_digest").get<Digest>();
        v.provenance_note = j.at("provenance_note").get<std::string>();
        p = std::move(v);
        break;
    }
    }
}

void to_json(Json& j, const MetadataHeader& h)
{
    j = Json{{"created_at", h.created_at},
             {"updated_at", h.updated_at},
             {"origin", to_string(h.origin)},
             {"semantic_type", h.semantic_type},
             {"tags", h.tags},
             {"namespace", h.namespace_name},
             {"layer", to_string(h.layer)},
             {"memory_kind", to_string(h.memory_kind)},
             {"acl", h.acl},
             {"lifespan", h.lifespan},
             {"priority", h.priority},
             {"compliance", h.compliance},
             {"access_count", h.access_count},
             {"last_access", h.last_access},
             {"fingerprint", h.fingerprint},
             {"version_chain", h.version_chain},
             {"state", h.state}};
}

void from_json(const Json& j, MetadataHeader& h)
{
    h.created_at = j.at("created_at").get<Timestamp>();
    h.updated_at = j.at("updated_at").get<Timestamp>();
    h.origin = parse_origin(j.at("origin").get<std::string>());
    h.semantic_type = j.at("semantic_type").get<std::string>();
    h.tags = j.at("tags").get<std::set<std::string>>();
    h.namespace_name = j.at("namespace").get<std::string>();
    h.layer = parse_layer(j.at("layer").get<std::string>());
    h.memory_kind = parse_memory_kind(j.at("memory_kind").get<std::string>());
    h.acl = j.at("acl").get<AccessPolicy>();
    h.lifespan = j.at("lifespan").get<LifespanPolicy>();
    h.priority = j.at("priority").get<int>();
    h.compliance = j.at("compliance").get<Compliance>();
    h.access_count = j.at("access_count").get<std::uint64_t>();
    h.last_access = j.at("last_access").get<Timestamp>();
    h.fingerprint = j.at("fingerprint").get<Fingerprint>();
    h.version_chain = j.at("version_chain").get<std::vector<VersionRecord>>();
    h.state = j.at("state").get<LifecycleState>();
}

void to_json(Json& j, const MemCube& c)
{
    j = Json{{"cube_id", c.cube_id}, {"header", c.header}, {"payload", c.payload}};
}

void from_json(const Json& j, MemCube& c)
{
    c.cube_id = j.at("cube_id").get<std::string>();
    c.header = j.at("header").get<MetadataHeader>();
    c.payload = j.at("payload").get<MemoryPayload>();
}

std::string canonical_dump(const Json& j)
{
    return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::string canonical_encode(const MemCube& cube) { return canonical_dump(Json(cube)); }

Json parse_canonical(std::string_view bytes)
{
    try {
        return Json::parse(bytes.begin(), bytes.end());
    } catch (const Json::parse_error& e) {
        throw DecodeError(e.byte, e.what());
    }
}

MemCube canonical_decode(std::string_view bytes)
{
    const Json j = parse_canonical(bytes);
    try {
        return j.get<MemCube>();
    } catch (const Json::exception& e) {
        throw DecodeError(0, e.what());
    } catch (const Error& e) {
        throw DecodeError(0, e.detail());
    }
}

std::string canonical_payload(const MemoryPayload& payload) { return canonical_dump(Json(payload)); }

Digest payload_digest(const MemoryPayload& payload) { return sha256(canonical_payload(payload)); }

}  // namespace memkernel
