// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/governance/governance.hpp"

#include "memkernel/core/cube.hpp"
#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <array>

namespace memkernel {

AccessDecision decide_access(const Identity& actor, const MemCube& cube, const CallContext& /*ctx*/, AccessOp op)
{
    const auto& h = cube.header;
    const auto& acl = h.acl;
    const bool frozen = h.state.is_frozen();
    if (actor == acl.owner) {
        if (op == AccessOp::Write && frozen) {
            return AccessDecision::deny(deny_reason::kFrozen);
        }
        return AccessDecision::allow();
    }
    if (op == AccessOp::Read || op == AccessOp::Export) {
        const bool listed = acl.readers_wildcard || acl.readers.contains(actor);
        const bool shared = (acl.share_scope == ShareScope::Shared || acl.share_scope == ShareScope::ReadOnly) &&
                            (h.layer == MemoryLayer::Shared || h.layer == MemoryLayer::Global);
        return listed || shared ? AccessDecision::allow() : AccessDecision::deny(deny_reason::kNotReader);
    }
    if (acl.share_scope == ShareScope::ReadOnly) {
        return AccessDecision::deny(deny_reason::kReadOnly);
    }
    if (frozen) {
        return AccessDecision::deny(deny_reason::kFrozen);
    }
    if (!acl.writers.contains(actor)) {
        return AccessDecision::deny(deny_reason::kNotWriter);
    }
    return AccessDecision::allow();
}

namespace {

constexpr std::array<std::pair<AuditOp, std::string_view>, 10> kAuditOps{{
    {AuditOp::Create, "Create"},
    {AuditOp::Read, "Read"},
    {AuditOp::Update, "Update"},
    {AuditOp::Transition, "Transition"},
    {AuditOp::Migrate, "Migrate"},
    {AuditOp::Export, "Export"},
    {AuditOp::Import, "Import"},
    {AuditOp::Publish, "Publish"},
    {AuditOp::Pull, "Pull"},
    {AuditOp::Deny, "Deny"},
}};

}  // namespace

std::string_view to_string(AuditOp op) noexcept
{
    for (const auto& [o, n] : kAuditOps) {
        if (o == op) return n;
    }
    return "?";
}

AuditOp parse_audit_op(std::string_view s)
{
    for (const auto& [o, n] : kAuditOps) {
        if (n == s) return o;
    }
    throw Error(ErrorCode::BadArgs, "unknown audit op '" + std::string(s) + "'");
}

void to_json(Json& j, const CallContext& c)
{
    j = Json{{"session_id", c.session_id}, {"purpose", c.purpose}, {"platform", c.platform}, {"time", c.time}};
}

void from_json(const Json& j, CallContext& c)
{
    c.session_id = j.at("session_id").get<std::string>();
    c.purpose = j.value("purpose", std::string{});
    c.platform = j.value("platform", std::string{});
    c.time = j.contains("time") ? j.at("time").get<Timestamp>() : Timestamp{};
}

void to_json(Json& j, const AuditRecord& r)
{
    j = Json{{"seq", r.seq},
             {"at", r.at},
             {"actor", r.actor},
             {"cube_id", r.cube_id},
             {"op", std::string(to_string(r.op))},
             {"context", r.context},
             {"allowed", r.allowed},
             {"reason", r.reason},
             {"detail", r.detail}};
    if (r.memory_kind) {
        j["memory_kind"] = std::string(to_string(*r.memory_kind));
    }
}

void from_json(const Json& j, AuditRecord& r)
{
    r.seq = j.at("seq").get<std::uint64_t>();
    r.at = j.at("at").get<Timestamp>();
    r.actor = j.at("actor").get<std::string>();
    r.cube_id = j.at("cube_id").get<std::string>();
    r.op = parse_audit_op(j.at("op").get<std::string>());
    r.context = j.at("context").get<CallContext>();
    r.allowed = j.at("allowed").get<bool>();
    r.reason = j.at("reason").get<std::string>();
    r.detail = j.at("detail").get<std::string>();
    r.memory_kind.reset();
    if (j.contains("memory_kind")) {
        r.memory_kind = parse_memory_kind(j.at("memory_kind").get<std::string>());
    }
}

bool AuditFilter::matches(const AuditRecord& r) const
{
    if (from && r.at < *from) return false;
    if (to && !(r.at < *to)) return false;
    if (actor && r.actor != *actor) return false;
    if (cube_id && r.cube_id != *cube_id) return false;
    if (op && r.op != *op) return false;
    if (memory_kind && r.memory_kind != memory_kind) return false;
    return true;
}

AuditLog::AuditLog(std::filesystem::path file) : file_(std::move(file))
{
    std::uintmax_t good_bytes = 0;
    if (std::filesystem::exists(*file_)) {
        std::ifstream in(*file_, std::ios::binary);
        std::string line;
        std::uintmax_t offset = 0;
        while (std::getline(in, line)) {
            const bool complete = !in.eof();
            if (!complete) break;  // no trailing newline: torn write
            try {
                AuditRecord r = parse_canonical(line).get<AuditRecord>();
                if (r.seq != records_.size() + 1) break;
                records_.push_back(std::move(r));
            } catch (const std::exception&) {
                break;
            }
            offset += line.size() + 1;
            good_bytes = offset;
        }
        in.close();
        std::filesystem::resize_file(*file_, good_bytes);
    } else if (file_->has_parent_path()) {
        std::filesystem::create_directories(file_->parent_path());
    }
    out_.open(*file_, std::ios::binary | std::ios::app);
    if (!out_) {
        throw Error(ErrorCode::AdapterUnavailable, "cannot open audit log " + file_->string());
    }
}

std::uint64_t AuditLog::append(AuditRecord record)
{
    std::lock_guard lock(mu_);
    record.seq = records_.size() + 1;
    if (out_.is_open()) {
        out_ << canonical_dump(Json(record)) << '\n';
        out_.flush();
    }
    records_.push_back(std::move(record));
    return records_.back().seq;
}

std::vector<AuditRecord> AuditLog::query(const AuditFilter& filter) const
{
    std::lock_guard lock(mu_);
    std::vector<AuditRecord> out;
    for (const auto& r : records_) {
        if (filter.matches(r)) out.push_back(r);
    }
    return out;
}

std::vector<AuditRecord> AuditLog::records() const
{
    std::lock_guard lock(mu_);
    return records_;
}

std::uint64_t AuditLog::size() const
{
    std::lock_guard lock(mu_);
    return records_.size();
}

std::uint64_t AuditLog::last_seq() const { return size(); }

void to_json(Json& j, const SensitivityRuleset& r)
{
    Json rules = Json::array();
    for (const auto& rule : r.rules) {
        rules.push_back(Json{{"id", rule.id}, {"pattern", rule.pattern}});
    }
    j = Json{{"id", r.id}, {"rules", rules}, {"mask_whole_text_tags", r.mask_whole_text_tags}};
}

void from_json(const Json& j, SensitivityRuleset& r)
{
    r.id = j.value("id", std::string("none"));
    r.rules.clear();
    for (const auto& rule : j.value("rules", Json::array())) {
        r.rules.push_back(SensitivityRule{rule.at("id").get<std::string>(), rule.at("pattern").get<std::string>()});
    }
    r.mask_whole_text_tags = j.value("mask_whole_text_tags", std::set<std::string>{});
}

Redactor::Redactor(SensitivityRuleset ruleset) : ruleset_(std::move(ruleset))
{
    for (const auto& rule : ruleset_.rules) {
        try {
            compiled_.emplace_back(rule.pattern, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw Error(ErrorCode::InvalidConfig, "sensitivity rule '" + rule.id + "': " + e.what());
        }
        if (std::regex_search(std::string(kMaskToken), compiled_.back())) {
            throw Error(ErrorCode::InvalidConfig, "sensitivity rule '" + rule.id + "' matches the mask token");
        }
    }
}

bool Redactor::matches_any(std::string_view text) const
{
    return std::any_of(compiled_.begin(), compiled_.end(), [&](const std::regex& re) {
        return std::regex_search(text.begin(), text.end(), re);
    });
}

std::string Redactor::redact_text(std::string_view text) const
{
    std::string out(text);
    // Masking can expose a new match across a former boundary; iterate to a fixpoint.
    for (int pass = 0; pass < 16 && matches_any(out); ++pass) {
        for (const auto& re : compiled_) {
            std::string next;
            auto begin = out.cbegin();
            for (std::sregex_iterator it(out.cbegin(), out.cend(), re), end; it != end; ++it) {
                const auto& m = *it;
                if (m.length(0) == 0) continue;
                next.append(begin, m[0].first);
                next.append(kMaskToken);
                begin = m[0].second;
            }
            next.append(begin, out.cend());
            out = std::move(next);
        }
    }
    return out;
}

MemCube Redactor::redact(const MemCube& cube, const Embedder& embedder) const
{
    MemCube out = cube;
    auto& h = out.header;
    const bool mask_all = std::any_of(h.compliance.sensitivity.begin(), h.compliance.sensitivity.end(),
                                      [&](const std::string& t) { return ruleset_.mask_whole_text_tags.contains(t); });
    const auto scrub = [&](const std::string& s) { return mask_all && !s.empty() ? std::string(kMaskToken) : redact_text(s); };

    MemoryPayload payload = out.payload;
    if (auto* p = std::get_if<PlaintextPayload>(&payload)) {
        p->text = scrub(p->text);
    } else if (auto* d = std::get_if<ParameterDeltaPayload>(&payload)) {
        d->provenance_note = scrub(d->provenance_note);
    }
    std::set<std::string> tags;
    for (const auto& t : h.tags) tags.insert(redact_text(t));
    h.tags = std::move(tags);
    h.semantic_type = redact_text(h.semantic_type);
    for (auto& e : h.compliance.lineage) {
        e.trigger = redact_text(e.trigger);
        e.context = redact_text(e.context);
        e.model_id = redact_text(e.model_id);
        for (auto& link : e.external_links) link = redact_text(link);
    }
    if (!(payload == out.payload)) {
        set_payload(out, std::move(payload), embedder);
        h.version_chain.back().snapshot_digest = payload_digest(out.payload);
    }
    return out;
}

Digest watermark_digest(std::string_view provider_id, const Digest& snapshot, std::string_view salt)
{
    return Sha256{}.update(provider_id).update(snapshot.bytes).update(salt).finish();
}

MemCube apply_watermark(const MemCube& cube, const std::string& provider_id, const std::string& salt)
{
    if (cube.header.state.is_frozen()) {
        throw Error(ErrorCode::FrozenViolation, "cube " + cube.cube_id + " is frozen");
    }
    MemCube out = cube;
    out.header.compliance.watermark =
        Watermark{watermark_digest(provider_id, payload_digest(cube.payload), salt), provider_id, salt};
    return out;
}

bool verify_watermark(const MemCube& cube)
{
    const auto& w = cube.header.compliance.watermark;
    return w && verify_watermark(w->digest, w->provider_id, cube);
}

bool verify_watermark(const Digest& watermark, std::string_view provider_id, const MemCube& cube)
{
    const auto& w = cube.header.compliance.watermark;
    if (!w) return false;
    return watermark_digest(provider_id, payload_digest(cube.payload), w->salt) == watermark;
}

}  // namespace memkernel
