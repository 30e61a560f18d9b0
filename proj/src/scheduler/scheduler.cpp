// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/scheduler/scheduler.hpp"

#include "memkernel/core/codec.hpp"
#include "memkernel/core/cube.hpp"
#include "memkernel/core/errors.hpp"
#include "memkernel/core/fingerprint.hpp"
#include "memkernel/lifecycle/lifecycle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace memkernel {

namespace {

[[noreturn]] void unmet(const std::string& rule, double observed, double threshold)
{
    std::ostringstream msg;
    msg << rule << ": observed " << observed << ", threshold " << threshold;
    throw Error(ErrorCode::PreconditionNotMet, msg.str());
}

void require_unfrozen(const MemCube& c)
{
    if (c.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, "cube " + c.cube_id + " is frozen");
}

void require_kind(const MemCube& c, MemoryKind k, const char* op)
{
    if (c.header.memory_kind != k) {
        throw Error(ErrorCode::IllegalForPayloadKind, std::string(op) + " needs a " + std::string(to_string(k)) +
                                                          " cube; " + c.cube_id + " is " +
                                                          std::string(to_string(c.header.memory_kind)));
    }
}

// A fresh cube inheriting descriptive and governance fields from `base`,
// rooted at v1 with the given op and parents.
MemCube derive(const MemCube& base, MemoryPayload payload, const CubeId& id, Timestamp now, const Identity& actor,
               VersionOp op, std::vector<VersionRef> parents, OriginSignature origin, const std::string& semantic_type)
{
    CubeDraft d;
    d.payload = std::move(payload);
    d.origin = origin;
    d.semantic_type = semantic_type;
    d.tags = base.header.tags;
    d.namespace_name = base.header.namespace_name;
    d.layer = base.header.layer;
    d.acl = base.header.acl;
    d.lifespan = base.header.lifespan;
    d.priority = base.header.priority;
    d.sensitivity = base.header.compliance.sensitivity;
    CreateContext ctx;
    ctx.cube_id = id;
    ctx.now = now;
    ctx.actor = actor;
    ctx.plaintext_exists = [](const CubeId&) { return true; };
    MemCube c = create_cube(std::move(d), ctx);
    auto& root = c.header.version_chain.front();
    root.op = op;
    root.parents = std::move(parents);
    return c;
}

bool edited_within(const MemCube& c, Timestamp now, double window)
{
    const auto& chain = c.header.version_chain;
    return std::any_of(chain.begin(), chain.end(), [&](const VersionRecord& r) {
        return r.op == VersionOp::Overwrite && now.seconds_since(r.at) < window;
    });
}

}  // namespace

void ScheduleWeights::check() const
{
    const double sum = w_sim + w_freq + w_rec + w_pri;
    if (w_sim < 0 || w_freq < 0 || w_rec < 0 || w_pri < 0 || std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidConfig, "schedule weights must be non-negative and sum to 1");
    }
    if (!(tau_recency > 0) || !(f_cap > 0)) {
        throw Error(ErrorCode::InvalidConfig, "tau_recency and F_cap must be positive");
    }
}

void MigrationRule::check() const
{
    if (!(theta_promote > 0) || !(theta_demote > 0) || !(theta_distill_sessions > 0) || !(window_seconds > 0)) {
        throw Error(ErrorCode::InvalidConfig, "migration thresholds must be positive");
    }
}

double score_terms(double cosine, std::uint64_t access_count, double dt_seconds, int priority,
                   const ScheduleWeights& w) noexcept
{
    const double sim = std::max(0.0, cosine);
    const double freq = std::min(1.0, std::log2(1.0 + static_cast<double>(access_count)) / std::log2(1.0 + w.f_cap));
    const double rec = std::exp(-std::max(0.0, dt_seconds) / w.tau_recency);
    const double pri = std::clamp(priority, 0, 100) / 100.0;
    return w.w_sim * sim + w.w_freq * freq + w.w_rec * rec + w.w_pri * pri;
}

double score(const MemCube& cube, const Fingerprint* query, Timestamp now, const ScheduleWeights& w)
{
    const auto& h = cube.header;
    double cosine = 0;
    if (query != nullptr && query->size() == h.fingerprint.size()) cosine = dot(*query, h.fingerprint);
    return score_terms(cosine, h.access_count, now.seconds_since(h.last_access), h.priority, w);
}

InjectionPlan select(std::vector<Candidate> candidates, std::uint64_t budget_tokens, std::size_t k)
{
    InjectionPlan plan;
    plan.budget = budget_tokens;
    std::set<CubeId> twinned;
    for (const auto& c : candidates) {
        if (c.kind == MemoryKind::Activation && !c.twin_of.empty()) twinned.insert(c.twin_of);
    }
    std::erase_if(candidates, [&](const Candidate& c) {
        return c.kind == MemoryKind::Plaintext && twinned.contains(c.cube_id);
    });
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.updated_at != b.updated_at) return b.updated_at < a.updated_at;
        return a.cube_id < b.cube_id;
    });
    std::set<CubeId> seen_sources;
    std::size_t accepted = 0;
    for (const auto& c : candidates) {
        if (accepted >= k) break;
        if (c.kind == MemoryKind::Parameter) {
            if (plan.parameter_modules.size() >= kMaxParameterModules) continue;
            plan.parameter_modules.push_back(PlanItem{c.cube_id, 0, c.score});
            ++accepted;
            continue;
        }
        if (c.kind == MemoryKind::Activation && !c.twin_of.empty() && seen_sources.contains(c.twin_of)) continue;
        if (plan.total_tokens + c.token_count > budget_tokens) continue;
        plan.total_tokens += c.token_count;
        auto& bucket = c.kind == MemoryKind::Activation ? plan.activation_items : plan.plaintext_items;
        bucket.push_back(PlanItem{c.cube_id, c.token_count, c.score});
        if (c.kind == MemoryKind::Activation) seen_sources.insert(c.twin_of);
        ++accepted;
    }
    return plan;
}

std::size_t accesses_in_window(std::span<const Timestamp> accesses, Timestamp now, double window_seconds)
{
    return static_cast<std::size_t>(std::count_if(accesses.begin(), accesses.end(), [&](Timestamp t) {
        const double age = now.seconds_since(t);
        return age >= 0 && age < window_seconds;
    }));
}

double heat(std::span<const Timestamp> accesses, Timestamp now, const MigrationRule& rule)
{
    double h = 0;
    for (const auto t : accesses) {
        const double age = now.seconds_since(t);
        if (age >= 0) h += std::exp(-age / rule.window_seconds);
    }
    return h / rule.theta_promote;
}

Digest distill_digest(std::span<const MemCube> sources)
{
    Sha256 h;
    for (const auto& c : sources) h.update(canonical_payload(c.payload));
    return h.finish();
}

Scheduler::Scheduler(ScheduleWeights weights, MigrationRule rule, const InferenceEngine& engine)
    : weights_(weights), rule_(rule), engine_(&engine)
{
    weights_.check();
    rule_.check();
}

Candidate Scheduler::candidate(const MemCube& cube, const Fingerprint* query, Timestamp now) const
{
    Candidate c;
    c.cube_id = cube.cube_id;
    c.kind = cube.header.memory_kind;
    c.score = score(cube, query, now, weights_);
    c.updated_at = cube.header.updated_at;
    if (const auto* p = cube.plaintext()) {
        c.token_count = token_count(p->text);
    } else if (const auto* a = cube.activation()) {
        c.token_count = a->token_count;
        c.twin_of = a->source_cube;
    }
    return c;
}

PromoteResult Scheduler::promote(const MemCube& source, std::span<const Timestamp> accesses, Timestamp now,
                                 const CubeId& new_id, const Identity& actor) const
{
    require_kind(source, MemoryKind::Plaintext, "promote");
    require_unfrozen(source);
    const auto n = accesses_in_window(accesses, now, rule_.window_seconds);
    if (static_cast<double>(n) < rule_.theta_promote) unmet("promote.accesses_in_window", static_cast<double>(n), rule_.theta_promote);

    const auto tokens = whitespace_tokens(source.plaintext()->text);
    ActivationPayload a;
    a.source_cube = source.cube_id;
    a.token_count = tokens.size();
    a.engine_tag = engine_->tag();
    a.kv_state = engine_->serialize(engine_->encode(tokens));

    PromoteResult r{derive(source, std::move(a), new_id, now, actor, VersionOp::Import,
                           {{source.cube_id, source.version()}}, OriginSignature::InferenceExtracted,
                           source.header.semantic_type),
                    source};
    r.twin.header.state = LifecycleState::of(StateKind::Activated);
    r.twin.header.compliance.lineage.push_back(
        ProvenanceEvent{"promote", "plaintext to activation", engine_->tag(), {source.cube_id}, actor, now});
    append_version(r.source, VersionOp::Import, {{new_id, 1}}, actor, now, "promoted");
    return r;
}

MemCube Scheduler::demote(const MemCube& twin, std::span<const Timestamp> accesses, Timestamp now,
                          const Identity& actor) const
{
    require_kind(twin, MemoryKind::Activation, "demote");
    require_unfrozen(twin);
    const double h = heat(accesses, now, rule_);
    if (!(h < rule_.theta_demote)) unmet("demote.heat", h, rule_.theta_demote);
    return transition(twin, LifecycleEvent::of(EventKind::ArchiveRequest), now, actor).cube;
}

Provenanced Scheduler::distill(std::span<const MemCube> sources, const std::set<std::string>& sessions, Timestamp now,
                               const CubeId& new_id, const Identity& actor) const
{
    if (sources.empty()) unmet("distill.sources", 0, 1);
    std::string note;
    std::vector<VersionRef> parents;
    std::vector<std::string> links;
    std::set<std::string> tags;
    for (const auto& s : sources) {
        require_kind(s, MemoryKind::Plaintext, "distill");
        if (s.header.namespace_name != sources.front().header.namespace_name) {
            throw Error(ErrorCode::PreconditionNotMet, "distill: sources span namespaces");
        }
        if (edited_within(s, now, rule_.window_seconds)) {
            throw Error(ErrorCode::PreconditionNotMet, "distill.stable: " + s.cube_id + " was overwritten within the window");
        }
        if (!note.empty()) note += "\n";
        note += s.plaintext()->text;
        parents.push_back({s.cube_id, s.version()});
        links.push_back(s.cube_id);
        tags.insert(s.header.tags.begin(), s.header.tags.end());
    }
    if (static_cast<double>(sessions.size()) < rule_.theta_distill_sessions) {
        unmet("distill.distinct_sessions", static_cast<double>(sessions.size()), rule_.theta_distill_sessions);
    }
    ParameterDeltaPayload p;
    p.target_module = "distill/" + sources.front().header.namespace_name;
    p.rank = 8;
    p.blob_digest = distill_digest(sources);
    p.provenance_note = note;
    const VersionOp op = sources.size() >= 2 ? VersionOp::Merge : VersionOp::Import;
    Provenanced out{derive(sources.front(), std::move(p), new_id, now, actor, op, std::move(parents),
                           OriginSignature::ParameterFinetune, "parameter-module"),
                    {}};
    out.derived.header.tags = std::move(tags);
    std::string ctx = "sessions=";
    for (const auto& s : sessions) ctx += (ctx.back() == '=' ? "" : ",") + s;
    out.derived.header.compliance.lineage.push_back(ProvenanceEvent{"distill", ctx, engine_->tag(), links, actor, now});
    return out;
}

Provenanced Scheduler::offload(const MemCube& param, bool is_cold, Timestamp now, const CubeId& new_id,
                               const Identity& actor) const
{
    require_kind(param, MemoryKind::Parameter, "offload");
    require_unfrozen(param);
    if (!is_cold) unmet("offload.cold", 0, 1);
    std::vector<std::string> links;
    for (const auto& e : param.header.compliance.lineage) {
        if (e.trigger == "distill") links = e.external_links;
    }
    PlaintextPayload text;
    text.text = param.parameter()->provenance_note;
    if (text.text.empty()) throw Error(ErrorCode::PreconditionNotMet, "offload: parameter cube has no provenance note");
    for (const auto& id : links) text.graph_refs.push_back(GraphRef{"distilled_from", id});
    Provenanced out{derive(param, std::move(text), new_id, now, actor, VersionOp::Import, {{param.cube_id, param.version()}},
                           OriginSignature::ParameterFinetune, "offloaded"),
                    {}};
    out.derived.header.compliance.lineage = param.header.compliance.lineage;
    out.derived.header.compliance.lineage.push_back(
        ProvenanceEvent{"offload", "parameter to plaintext", engine_->tag(), links, actor, now});
    out.sources.push_back(transition(param, LifecycleEvent::of(EventKind::ArchiveRequest), now, actor).cube);
    return out;
}

EvictionResult Scheduler::evict(std::span<const MemCube> cubes, std::size_t capacity, Timestamp now) const
{
    EvictionResult r;
    std::size_t active = 0;
    struct Movable {
        double score;
        Timestamp last_access;
        CubeId id;
    };
    std::vector<Movable> movable;
    for (const auto& c : cubes) {
        const auto k = c.header.state.kind;
        if (k == StateKind::Archived || k == StateKind::Expired) continue;
        ++active;
        if (k != StateKind::Frozen) movable.push_back({score(c, nullptr, now, weights_), c.header.last_access, c.cube_id});
    }
    if (active <= capacity) return r;
    std::sort(movable.begin(), movable.end(), [](const Movable& a, const Movable& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.last_access != b.last_access) return a.last_access < b.last_access;
        return a.id < b.id;
    });
    for (const auto& m : movable) {
        if (active <= capacity) break;
        r.evicted.push_back(m.id);
        --active;
    }
    r.frozen_blocked = active > capacity;
    return r;
}

}  // namespace memkernel
