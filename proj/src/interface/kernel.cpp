// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/interface/kernel.hpp"

#include "memkernel/core/errors.hpp"

#include <algorithm>
#include <array>
#include <type_traits>

namespace memkernel {

namespace {

thread_local std::uint64_t t_last_seq = 0;

constexpr std::size_t kMaxRememberedAccesses = 1024;

constexpr std::array<std::pair<UpdateMode, std::string_view>, 3> kUpdateModes{{
    {UpdateMode::Append, "Append"},
    {UpdateMode::Merge, "Merge"},
    {UpdateMode::Overwrite, "Overwrite"},
}};

bool is_denial(ErrorCode c)
{
    return c == ErrorCode::AccessDenied || c == ErrorCode::ReadOnlyNamespace || c == ErrorCode::AuthorizationFailed;
}

std::unique_ptr<IdGenerator> make_ids(std::uint64_t seed)
{
    return seed != 0 ? std::make_unique<IdGenerator>(seed) : std::make_unique<IdGenerator>();
}

std::string join_text(const std::string& a, const std::string& b)
{
    return a + std::string(kAppendSeparator) + b;
}

AuditOp step_audit_op(StepOp op)
{
    switch (op) {
    case StepOp::Retrieve:
    case StepOp::Augment: return AuditOp::Read;
    case StepOp::Update:
    case StepOp::Provenance: return AuditOp::Update;
    case StepOp::Archive: return AuditOp::Transition;
    }
    return AuditOp::Read;
}

bool is_mutating(StepOp op) { return op == StepOp::Update || op == StepOp::Provenance || op == StepOp::Archive; }

}  // namespace

std::string_view to_string(UpdateMode m) noexcept
{
    for (const auto& [k, n] : kUpdateModes) {
        if (k == m) return n;
    }
    return "?";
}

UpdateMode parse_update_mode(std::string_view s)
{
    for (const auto& [k, n] : kUpdateModes) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown update mode '" + std::string(s) + "'");
}

struct Kernel::Call {
    AuditRecord rec;
};

Kernel::Kernel(KernelConfig config, const Clock& clock, const Embedder& embedder, const InferenceEngine& engine)
    : config_(std::move(config)),
      clock_(&clock),
      embedder_(&embedder),
      engine_(&engine),
      ids_(make_ids(config_.id_seed)),
      vault_(config_.admins, config_.recover),
      index_(embedder),
      audit_(config_.audit_file ? std::make_unique<AuditLog>(*config_.audit_file) : std::make_unique<AuditLog>()),
      exchange_(config_.exchange_file ? std::make_unique<Exchange>(*config_.exchange_file, embedder)
                                      : std::make_unique<Exchange>(embedder)),
      redactor_(config_.ruleset),
      scheduler_(config_.weights, config_.rule, engine),
      cache_(config_.cache)
{
}

Namespace& Kernel::open_namespace(const NamespaceDescriptor& desc)
{
    Namespace& ns = vault_.open_namespace(desc);
    for (const auto& s : ns.snapshot()) {
        index_.upsert(s.cube);
        if (const auto* a = s.cube.activation()) {
            std::lock_guard lk(access_mu_);
            twins_[a->source_cube] = s.cube.cube_id;
        }
    }
    return ns;
}

Digest Kernel::state_digest() const
{
    Sha256 h;
    for (const auto& s : vault_.all()) {
        h.update(canonical_encode(s.cube));
        h.update(std::string_view("\n"));
    }
    return h.finish();
}

std::vector<Timestamp> Kernel::accesses(const CubeId& id) const
{
    std::lock_guard lk(access_mu_);
    const auto it = accesses_.find(id);
    if (it == accesses_.end()) return {};
    return {it->second.begin(), it->second.end()};
}

std::optional<CubeId> Kernel::twin_of(const CubeId& source) const
{
    std::lock_guard lk(access_mu_);
    const auto it = twins_.find(source);
    if (it == twins_.end()) return std::nullopt;
    return it->second;
}

std::uint64_t Kernel::last_audit_seq() noexcept { return t_last_seq; }

void Kernel::clear_last_audit_seq() noexcept { t_last_seq = 0; }

std::uint64_t Kernel::audit_external(const Identity& actor, const CallContext& ctx, AuditOp op, std::string_view name,
                                     std::optional<ErrorCode> failure, std::string_view message)
{
    AuditRecord r;
    r.at = now();
    r.actor = actor;
    r.op = op;
    r.context = ctx;
    r.detail = std::string(name);
    if (failure) {
        r.reason = std::string(error_code_name(*failure));
        if (is_denial(*failure)) {
            r.op = AuditOp::Deny;
            r.allowed = false;
            r.reason = std::string(message);
        }
    }
    return append_audit(r);
}

std::uint64_t Kernel::append_audit(const AuditRecord& r)
{
    t_last_seq = audit_->append(r);
    return t_last_seq;
}

template <typename F>
auto Kernel::audited(const Identity& actor, const CallContext& ctx, AuditOp op, std::string_view name,
                     const CubeId& cube, F&& body) -> decltype(body(std::declval<Call&>()))
{
    using R = decltype(body(std::declval<Call&>()));
    Call call;
    call.rec.at = now();
    call.rec.actor = actor;
    call.rec.cube_id = cube;
    call.rec.op = op;
    call.rec.context = ctx;
    call.rec.detail = std::string(name);
    if (auto c = vault_.find(cube)) call.rec.memory_kind = c->cube.header.memory_kind;

    bool appended = false;
    try {
        if (ctx.session_id.empty()) throw Error(ErrorCode::BadArgs, "context.session_id must be non-empty");
        if constexpr (std::is_void_v<R>) {
            body(call);
            appended = true;
            append_audit(call.rec);
        } else {
            R result = body(call);
            appended = true;
            append_audit(call.rec);
            return result;
        }
    } catch (const Error& e) {
        if (appended) throw;
        call.rec.reason = std::string(error_code_name(e.code()));
        if (is_denial(e.code())) {
            call.rec.op = AuditOp::Deny;
            call.rec.allowed = false;
            call.rec.reason = e.detail();
        }
        append_audit(call.rec);
        throw;
    } catch (const std::exception& e) {
        if (appended) throw;
        call.rec.reason = std::string(error_code_name(ErrorCode::Internal));
        append_audit(call.rec);
        throw Error(ErrorCode::Internal, e.what());
    }
}

MemCube Kernel::load_cube(const CubeId& id) const
{
    auto s = vault_.find(id);
    if (!s) throw Error(ErrorCode::UnknownCube, id);
    return std::move(s->cube);
}

void Kernel::require(const Identity& actor, const MemCube& cube, const CallContext& ctx, AccessOp op) const
{
    const auto d = decide_access(actor, cube, ctx, op);
    if (!d.allowed) throw Error(ErrorCode::AccessDenied, d.reason);
}

void Kernel::require_namespace_write(const std::string& ns, const Identity& actor) const
{
    const auto& desc = vault_.ns(ns).descriptor();
    if (desc.mode == NamespaceMode::ReadOnlyCache && !vault_.is_admin(actor)) {
        throw Error(ErrorCode::ReadOnlyNamespace, ns);
    }
}

void Kernel::commit(const MemCube& cube)
{
    vault_.store(cube);
    index_.upsert(cube);
    if (const auto* a = cube.activation()) {
        std::lock_guard lk(access_mu_);
        twins_[a->source_cube] = cube.cube_id;
    }
}

std::mutex& Kernel::ns_mutex(const std::string& ns)
{
    std::lock_guard lk(ns_mu_);
    auto& m = ns_locks_[ns];
    if (!m) m = std::make_unique<std::mutex>();
    return *m;
}

std::vector<std::unique_lock<std::mutex>> Kernel::lock_namespaces(std::set<std::string> names)
{
    std::vector<std::unique_lock<std::mutex>> locks;
    for (const auto& n : names) locks.emplace_back(ns_mutex(n));
    return locks;
}

void Kernel::note_access(const CubeId& id, const CallContext& ctx, Timestamp at)
{
    std::lock_guard lk(access_mu_);
    auto& q = accesses_[id];
    q.push_back(at);
    while (q.size() > kMaxRememberedAccesses) q.pop_front();
    sessions_[id].insert(ctx.session_id);
}

MemCube Kernel::apply_update(MemCube cube, const UpdateRequest& req, const Identity& actor, Timestamp at,
                             std::vector<MemCube>* merged_sources,
                             const std::function<MemCube(const CubeId&)>& lookup) const
{
    const auto kind = cube.header.state.kind;
    if (cube.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, cube.cube_id + " is frozen");
    if (kind == StateKind::Expired) throw Error(ErrorCode::IllegalTransition, cube.cube_id + " has expired");
    const auto* text = cube.plaintext();
    if (text == nullptr) {
        throw Error(ErrorCode::IllegalForPayloadKind,
                    std::string(to_string(req.mode)) + " needs a Plaintext payload, cube is " +
                        std::string(to_string(cube.header.memory_kind)));
    }
    const std::uint64_t v = cube.version();
    PlaintextPayload next = *text;

    switch (req.mode) {
    case UpdateMode::Append:
        next.text = join_text(text->text, req.content);
        set_payload(cube, std::move(next), *embedder_);
        append_version(cube, VersionOp::Append, {{cube.cube_id, v}}, actor, at, req.label);
        return cube;
    case UpdateMode::Overwrite:
        if (req.content.empty()) throw Error(ErrorCode::InvalidPayload, "overwrite content is empty");
        next.text = req.content;
        set_payload(cube, std::move(next), *embedder_);
        append_version(cube, VersionOp::Overwrite, {{cube.cube_id, v}}, actor, at, req.label);
        return cube;
    case UpdateMode::Merge: break;
    }

    if (req.sources.empty()) throw Error(ErrorCode::BadArgs, "merge needs at least one source");
    if (kind != StateKind::Generated && kind != StateKind::Activated && kind != StateKind::Merged) {
        throw Error(ErrorCode::IllegalTransition, "cannot merge into a " + state_name(cube.header.state) + " cube");
    }
    std::set<CubeId> seen{cube.cube_id};
    std::vector<VersionRef> parents{{cube.cube_id, v}};
    for (const auto& sid : req.sources) {
        if (!seen.insert(sid).second) throw Error(ErrorCode::BadArgs, "merge source repeated or equal to target: " + sid);
        MemCube src = lookup(sid);
        if (src.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, sid + " is frozen");
        const auto* st = src.plaintext();
        if (st == nullptr) throw Error(ErrorCode::IllegalForPayloadKind, "merge source " + sid + " is not Plaintext");
        const auto sk = src.header.state.kind;
        if (sk == StateKind::Expired) throw Error(ErrorCode::IllegalTransition, sid + " has expired");
        next.text = join_text(next.text, st->text);
        next.graph_refs.push_back(GraphRef{"merged_from", sid});
        parents.push_back({sid, src.version()});
        if (merged_sources != nullptr) {
            if (table_accepts(sk, EventKind::ArchiveRequest)) {
                src = memkernel::transition(src, LifecycleEvent::of(EventKind::ArchiveRequest), at, actor).cube;
            }
            src.header.compliance.lineage.push_back(
                ProvenanceEvent{"merged", "merged into " + cube.cube_id, {}, {cube.cube_id}, actor, at});
            merged_sources->push_back(std::move(src));
        }
    }
    set_payload(cube, std::move(next), *embedder_);
    append_version(cube, VersionOp::Merge, std::move(parents), actor, at, req.label);
    cube.header.state = LifecycleState::of(StateKind::Merged);
    return cube;
}

MemCube Kernel::apply_provenance(MemCube cube, const ProvenanceInput& event, const Identity& actor, Timestamp at) const
{
    auto& c = cube.header.compliance;
    if (c.provenance_id.empty()) c.provenance_id = "prov-" + cube.cube_id;
    c.lineage.push_back(ProvenanceEvent{event.trigger, event.context, event.model_id, event.external_links, actor, at});
    return cube;
}

// ---- audited operations ----

MemCube Kernel::create(CubeDraft draft, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Create, "create", {}, [&](Call& call) {
        const std::string ns = draft.namespace_name;
        vault_.ns(ns);
        require_namespace_write(ns, actor);
        if (draft.acl.owner.empty()) draft.acl = AccessPolicy::private_to(actor);
        if (draft.acl.owner != actor && !vault_.is_admin(actor)) throw Error(ErrorCode::AccessDenied, "NOT_OWNER");
        const Timestamp at = now();
        CreateContext cc;
        cc.cube_id = ids_->next(at);
        cc.now = at;
        cc.actor = actor;
        cc.embedder = embedder_;
        cc.plaintext_exists = [this](const CubeId& id) {
            const auto s = vault_.find(id);
            return s && s->cube.plaintext() != nullptr;
        };
        auto lk = lock_namespaces({ns});
        MemCube cube = create_cube(std::move(draft), cc);
        commit(cube);
        call.rec.cube_id = cube.cube_id;
        call.rec.memory_kind = cube.header.memory_kind;
        return cube;
    });
}

MemCube Kernel::get(const CubeId& id, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "get", id, [&](Call&) {
        const Timestamp at = now();
        MemCube cube = load_cube(id);
        auto lk = lock_namespaces({cube.header.namespace_name});
        cube = load_cube(id);
        require(actor, cube, ctx, AccessOp::Read);
        const auto k = cube.header.state.kind;
        if (k != StateKind::Frozen && k != StateKind::Expired) {
            if (table_accepts(k, EventKind::Access)) {
                cube = memkernel::transition(cube, LifecycleEvent::of(EventKind::Access), at, actor).cube;
            }
            ++cube.header.access_count;
            cube.header.last_access = std::max(at, cube.header.last_access);
            commit(cube);
        }
        note_access(id, ctx, at);
        cache_.touch(id, cube.header.fingerprint, at);
        return cube;
    });
}

std::vector<CubeId> Kernel::list(const std::string& ns, const StructuredFilter& filter, const Identity& actor,
                                 const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "list", {}, [&](Call& call) {
        filter.check();
        auto out = vault_.list(ns, [&](const MemCube& c) { return filter.matches(c); }, actor, ctx);
        call.rec.detail += " n=" + std::to_string(out.size());
        return out;
    });
}

std::vector<CubeId> Kernel::query_structured(const StructuredFilter& filter, const Identity& actor,
                                             const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "query_structured", {}, [&](Call& call) {
        auto out = index_.query_structured(filter, actor, ctx);
        call.rec.detail += " n=" + std::to_string(out.size());
        return out;
    });
}

std::vector<RankedHit> Kernel::query_semantic(const std::string& text, std::size_t k, const Identity& actor,
                                              const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "query_semantic", {}, [&](Call& call) {
        auto out = index_.query_semantic(text, k, actor, ctx);
        cache_.note_query(embedder_->embed(text), now());
        call.rec.detail += " n=" + std::to_string(out.size());
        return out;
    });
}

std::vector<RankedHit> Kernel::query_hybrid(const StructuredFilter& filter, const std::string& text, std::size_t k,
                                            const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "query_hybrid", {}, [&](Call& call) {
        auto out = index_.query_hybrid(filter, text, k, actor, ctx);
        cache_.note_query(embedder_->embed(text), now());
        call.rec.detail += " n=" + std::to_string(out.size());
        return out;
    });
}

RetrievalPlan Kernel::resolve_path(const std::string& task, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "resolve_path", {}, [&](Call&) { return index_.resolve_path(task); });
}

MemoryCall Kernel::parse(const std::string& prompt, const std::vector<MemoryCall>& dialogue, const Identity& actor,
                         const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "parse", {}, [&](Call&) {
        return memkernel::parse(ReaderInput{prompt, dialogue, clock_, actor, ctx.session_id});
    });
}

std::uint64_t Kernel::update(const UpdateRequest& req, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Update, "update", req.cube_id, [&](Call& call) {
        call.rec.detail += " " + std::string(to_string(req.mode));
        std::set<std::string> spaces{load_cube(req.cube_id).header.namespace_name};
        for (const auto& s : req.sources) spaces.insert(load_cube(s).header.namespace_name);
        auto lk = lock_namespaces(spaces);

        MemCube cube = load_cube(req.cube_id);
        if (cube.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, req.cube_id + " is frozen");
        require_namespace_write(cube.header.namespace_name, actor);
        require(actor, cube, ctx, AccessOp::Write);
        if (cube.version() != req.expected_version) {
            throw Error(ErrorCode::VersionConflict, "expected " + std::to_string(req.expected_version) + ", actual " +
                                                        std::to_string(cube.version()));
        }
        std::vector<MemCube> sources;
        const auto lookup = [&](const CubeId& id) {
            MemCube s = load_cube(id);
            require(actor, s, ctx, AccessOp::Read);
            if (req.mode == UpdateMode::Merge) require(actor, s, ctx, AccessOp::Write);
            return s;
        };
        MemCube next = apply_update(std::move(cube), req, actor, now(), &sources, lookup);
        for (const auto& s : sources) commit(s);
        commit(next);
        return next.version();
    });
}

std::string Kernel::provenance(const CubeId& id, const ProvenanceInput& event, const Identity& actor,
                               const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Update, "provenance", id, [&](Call&) {
        auto lk = lock_namespaces({load_cube(id).header.namespace_name});
        MemCube cube = load_cube(id);
        require(actor, cube, ctx, AccessOp::Write);
        cube = apply_provenance(std::move(cube), event, actor, now());
        commit(cube);
        return cube.header.compliance.provenance_id;
    });
}

TransitionResult Kernel::transition(const CubeId& id, const LifecycleEvent& event, const Identity& actor,
                                    const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Transition, "transition", id, [&](Call& call) {
        call.rec.detail += " " + std::string(to_string(event.kind));
        auto lk = lock_namespaces({load_cube(id).header.namespace_name});
        MemCube cube = load_cube(id);
        switch (event.kind) {
        case EventKind::Access: require(actor, cube, ctx, AccessOp::Read); break;
        case EventKind::Freeze:
        case EventKind::Unfreeze:
            if (actor != cube.header.acl.owner && !vault_.is_admin(actor)) {
                throw Error(ErrorCode::AccessDenied, "NOT_OWNER");
            }
            break;
        default:
            if (!cube.header.state.is_frozen()) require(actor, cube, ctx, AccessOp::Write);
            break;
        }
        auto r = memkernel::transition(cube, event, now(), actor, &vault_);
        commit(r.cube);
        if (event.kind == EventKind::Access) note_access(id, ctx, now());
        return r;
    });
}

MemCube Kernel::rollback(const CubeId& id, std::uint64_t version, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Update, "rollback", id, [&](Call& call) {
        call.rec.detail += " v" + std::to_string(version);
        auto lk = lock_namespaces({load_cube(id).header.namespace_name});
        MemCube cube = load_cube(id);
        if (cube.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, id + " is frozen");
        require(actor, cube, ctx, AccessOp::Write);
        MemCube next = memkernel::rollback(cube, version, vault_, actor, now(), *embedder_);
        commit(next);
        return next;
    });
}

std::vector<TickChange> Kernel::tick(const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Transition, "tick", {}, [&](Call& call) {
        const Timestamp at = now();
        std::vector<MemCube> cubes;
        for (auto& s : vault_.all()) cubes.push_back(std::move(s.cube));
        std::vector<TickChange> changes;
        for (const auto& c : cubes) {
            if (!due_state(c, at)) continue;
            auto lk = lock_namespaces({c.header.namespace_name});
            const MemCube cur = load_cube(c.cube_id);
            const auto r = memkernel::transition(cur, LifecycleEvent::of(EventKind::Tick), at, actor);
            if (r.from == r.to) continue;
            commit(r.cube);
            changes.push_back(TickChange{c.cube_id, r.from, r.to});
        }
        call.rec.detail += " changes=" + std::to_string(changes.size());
        return changes;
    });
}

MemCube Kernel::watermark(const CubeId& id, const std::string& provider_id, const std::string& salt,
                          const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Update, "watermark", id, [&](Call&) {
        auto lk = lock_namespaces({load_cube(id).header.namespace_name});
        MemCube cube = load_cube(id);
        if (cube.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, id + " is frozen");
        require(actor, cube, ctx, AccessOp::Write);
        MemCube next = apply_watermark(cube, provider_id, salt);
        commit(next);
        return next;
    });
}

void Kernel::migrate_tier(const CubeId& id, Tier target, const Identity& actor, const CallContext& ctx)
{
    audited(actor, ctx, AuditOp::Migrate, "migrate_tier", id, [&](Call& call) {
        call.rec.detail += std::string(" ") + std::string(to_string(target));
        const MemCube cube = load_cube(id);
        auto lk = lock_namespaces({cube.header.namespace_name});
        require(actor, cube, ctx, AccessOp::Write);
        vault_.migrate_tier(cube.header.namespace_name, id, target);
    });
}

InjectionPlan Kernel::plan(const std::string& query_text, std::uint64_t budget_tokens, std::size_t k,
                           const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "plan", {}, [&](Call& call) {
        const Timestamp at = now();
        const Fingerprint q = embedder_->embed(query_text);
        const auto hits = index_.query_semantic(query_text, std::max<std::size_t>(4 * k, 64), actor, ctx);
        std::vector<Candidate> cands;
        std::set<CubeId> seen;
        for (const auto& h : hits) {
            auto s = vault_.find(h.cube_id);
            if (!s) continue;
            const MemCube& c = s->cube;
            const auto st = c.header.state.kind;
            if (st == StateKind::Archived || st == StateKind::Expired) continue;
            if (!seen.insert(c.cube_id).second) continue;
            const Candidate base = scheduler_.candidate(c, &q, at);
            cands.push_back(base);
            if (c.plaintext() == nullptr) continue;
            CubeId twin_id;
            {
                std::lock_guard lk(access_mu_);
                const auto it = twins_.find(c.cube_id);
                if (it != twins_.end()) twin_id = it->second;
            }
            if (twin_id.empty() || seen.contains(twin_id)) continue;
            const auto t = vault_.find(twin_id);
            if (!t) continue;
            const auto tk = t->cube.header.state.kind;
            if (tk == StateKind::Archived || tk == StateKind::Expired) continue;
            if (!decide_access(actor, t->cube, ctx, AccessOp::Read).allowed) continue;
            Candidate twin = scheduler_.candidate(t->cube, &q, at);
            twin.score = base.score;  // same content as the source
            seen.insert(twin_id);
            cands.push_back(std::move(twin));
        }
        auto plan = select(std::move(cands), budget_tokens, k);
        call.rec.detail += " items=" + std::to_string(plan.size()) + " tokens=" + std::to_string(plan.total_tokens);
        return plan;
    });
}

MemCube Kernel::promote(const CubeId& id, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Migrate, "promote", id, [&](Call& call) {
        auto lk = lock_namespaces({load_cube(id).header.namespace_name});
        const MemCube src = load_cube(id);
        require(actor, src, ctx, AccessOp::Write);
        const Timestamp at = now();
        const auto acc = accesses(id);
        auto r = scheduler_.promote(src, acc, at, ids_->next(at), actor);
        commit(r.twin);
        commit(r.source);
        call.rec.detail += " twin=" + r.twin.cube_id;
        return r.twin;
    });
}

MemCube Kernel::demote(const CubeId& twin_id, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Migrate, "demote", twin_id, [&](Call&) {
        auto lk = lock_namespaces({load_cube(twin_id).header.namespace_name});
        const MemCube twin = load_cube(twin_id);
        require(actor, twin, ctx, AccessOp::Write);
        auto acc = accesses(twin_id);
        if (const auto* a = twin.activation()) {
            const auto more = accesses(a->source_cube);
            acc.insert(acc.end(), more.begin(), more.end());
        }
        MemCube out = scheduler_.demote(twin, acc, now(), actor);
        commit(out);
        return out;
    });
}

MemCube Kernel::distill(const std::vector<CubeId>& ids, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Migrate, "distill", ids.size() == 1 ? ids.front() : CubeId{}, [&](Call& call) {
        std::vector<MemCube> sources;
        std::set<std::string> sessions;
        std::set<std::string> spaces;
        for (const auto& id : ids) spaces.insert(load_cube(id).header.namespace_name);
        auto lk = lock_namespaces(spaces);
        for (const auto& id : ids) {
            MemCube c = load_cube(id);
            require(actor, c, ctx, AccessOp::Read);
            sources.push_back(std::move(c));
            std::lock_guard alk(access_mu_);
            const auto it = sessions_.find(id);
            if (it != sessions_.end()) sessions.insert(it->second.begin(), it->second.end());
        }
        const Timestamp at = now();
        auto r = scheduler_.distill(sources, sessions, at, ids_->next(at), actor);
        require_namespace_write(r.derived.header.namespace_name, actor);
        commit(r.derived);
        for (const auto& s : r.sources) commit(s);
        call.rec.detail += " param=" + r.derived.cube_id;
        return r.derived;
    });
}

MemCube Kernel::offload(const CubeId& param_id, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Migrate, "offload", param_id, [&](Call& call) {
        const auto stored = vault_.find(param_id);
        if (!stored) throw Error(ErrorCode::UnknownCube, param_id);
        auto lk = lock_namespaces({stored->cube.header.namespace_name});
        const auto s = vault_.find(param_id);
        require(actor, s->cube, ctx, AccessOp::Write);
        const Timestamp at = now();
        const auto acc = accesses(param_id);
        const bool cold = s->tier == Tier::Cold || heat(acc, at, scheduler_.rule()) < scheduler_.rule().theta_demote;
        auto r = scheduler_.offload(s->cube, cold, at, ids_->next(at), actor);
        commit(r.derived);
        for (const auto& src : r.sources) commit(src);
        call.rec.detail += " plaintext=" + r.derived.cube_id;
        return r.derived;
    });
}

EvictionResult Kernel::evict(const std::string& ns, std::optional<std::size_t> capacity, const Identity& actor,
                             const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Migrate, "evict", {}, [&](Call& call) {
        const auto& space = vault_.ns(ns);
        const auto cap = capacity ? capacity : space.descriptor().capacity_cubes;
        if (!cap) throw Error(ErrorCode::BadArgs, "namespace " + ns + " has no capacity and none was given");
        auto lk = lock_namespaces({ns});
        std::vector<MemCube> cubes;
        for (auto& s : space.snapshot()) cubes.push_back(std::move(s.cube));
        const Timestamp at = now();
        auto r = scheduler_.evict(cubes, static_cast<std::size_t>(*cap), at);
        for (const auto& id : r.evicted) {
            commit(memkernel::transition(load_cube(id), LifecycleEvent::of(EventKind::ArchiveRequest), at, actor).cube);
        }
        call.rec.detail += " evicted=" + std::to_string(r.evicted.size());
        return r;
    });
}

CacheChanges Kernel::cache_evaluate(const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "cache_evaluate", {}, [&](Call&) { return cache_.evaluate(now()); });
}

std::vector<AuditRecord> Kernel::audit_query(const AuditFilter& filter, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "audit_query", {}, [&](Call& call) {
        auto out = audit_->query(filter);
        call.rec.detail += " n=" + std::to_string(out.size());
        return out;
    });
}

PipelineResult Kernel::pipeline_run(const PipelineSpec& spec, const Identity& actor, const CallContext& ctx,
                                    const PipelineHooks* hooks)
{
    PipelineResult res;
    const Timestamp at = now();
    auto record = [&](AuditOp op, const std::string& detail, const CubeId& cube, const Error* err) {
        AuditRecord r;
        r.at = now();
        r.actor = actor;
        r.cube_id = cube;
        r.op = op;
        r.context = ctx;
        r.detail = detail;
        if (err != nullptr) {
            r.reason = std::string(error_code_name(err->code()));
            if (is_denial(err->code())) {
                r.op = AuditOp::Deny;
                r.allowed = false;
                r.reason = err->detail();
            }
        }
        return append_audit(r);
    };

    try {
        if (ctx.session_id.empty()) throw Error(ErrorCode::BadArgs, "context.session_id must be non-empty");
        spec.check();
    } catch (const Error& e) {
        record(AuditOp::Read, "pipeline", {}, &e);
        throw;
    }

    // Fail-fast authorization over every statically known working set.
    {
        std::optional<std::vector<CubeId>> known = std::vector<CubeId>{};
        for (const auto& st : spec.steps) {
            try {
                if (st.op == StepOp::Retrieve) {
                    if (st.args.contains("ids") && st.args.at("ids").is_array()) {
                        std::vector<CubeId> ids;
                        for (const auto& j : st.args.at("ids")) {
                            const auto id = j.get<std::string>();
                            if (const auto s = vault_.find(id)) require(actor, s->cube, ctx, AccessOp::Read);
                            ids.push_back(id);
                        }
                        known = std::move(ids);
                    } else {
                        known.reset();
                    }
                } else if (is_mutating(st.op) && known) {
                    for (const auto& id : *known) {
                        if (const auto s = vault_.find(id)) {
                            if (!s->cube.header.state.is_frozen()) require(actor, s->cube, ctx, AccessOp::Write);
                            require_namespace_write(s->cube.header.namespace_name, actor);
                        }
                    }
                }
            } catch (const Error& e) {
                const Error denied(ErrorCode::AuthorizationFailed, e.detail());
                res.error = ErrorCode::AuthorizationFailed;
                res.failed_step = st.name;
                res.message = "step '" + st.name + "' not authorized: " + e.detail();
                record(AuditOp::Deny, "pipeline " + st.name, {}, &denied);
                return res;
            } catch (const Json::exception& e) {
                const Error bad(ErrorCode::BadArgs, e.what());
                record(AuditOp::Read, "pipeline " + st.name, {}, &bad);
                throw bad;
            }
        }
    }

    std::map<CubeId, MemCube> overlay;
    std::map<CubeId, MemCube> base;
    std::vector<CubeId> ws;
    std::string context_text;

    const auto lookup = [&](const CubeId& id) -> MemCube {
        const auto it = overlay.find(id);
        if (it != overlay.end()) return it->second;
        return load_cube(id);
    };
    const auto stage = [&](MemCube c) {
        if (!base.contains(c.cube_id)) base.emplace(c.cube_id, load_cube(c.cube_id));
        overlay[c.cube_id] = std::move(c);
    };
    const auto need_targets = [&] {
        if (ws.empty()) throw Error(ErrorCode::PreconditionNotMet, "no-target: working set is empty");
    };

    for (std::size_t i = 0; i < spec.steps.size(); ++i) {
        const auto& st = spec.steps[i];
        StepResult sr;
        sr.name = st.name;
        sr.op = st.op;
        const std::string label = "pipeline " + st.name + " " + std::string(to_string(st.op));
        try {
            if (hooks != nullptr && hooks->before_step) hooks->before_step(i, st);
            const Json& a = st.args;
            switch (st.op) {
            case StepOp::Retrieve: {
                std::vector<CubeId> next;
                if (a.contains("ids")) {
                    for (const auto& j : a.at("ids")) {
                        const auto id = j.get<std::string>();
                        require(actor, lookup(id), ctx, AccessOp::Read);
                        next.push_back(id);
                    }
                } else if (a.contains("prompt")) {
                    const MemoryCall mc =
                        memkernel::parse(ReaderInput{a.at("prompt").get<std::string>(), {}, clock_, actor, ctx.session_id});
                    StructuredFilter f;
                    std::vector<TagExpr> terms;
                    for (const auto& t : mc.topic_tags) terms.push_back(TagExpr::term(t));
                    if (!terms.empty()) f.tags = TagExpr::any_of(std::move(terms));
                    if (mc.time_window) {
                        f.from = mc.time_window->from;
                        f.to = mc.time_window->to;
                    }
                    next = index_.query_structured(f, actor, ctx);
                } else {
                    const std::size_t k = a.value("k", std::size_t{10});
                    std::optional<StructuredFilter> f;
                    if (a.contains("filter")) f = a.at("filter").get<StructuredFilter>();
                    if (a.contains("query")) {
                        const auto q = a.at("query").get<std::string>();
                        const auto hits = f ? index_.query_hybrid(*f, q, k, actor, ctx) : index_.query_semantic(q, k, actor, ctx);
                        for (const auto& h : hits) next.push_back(h.cube_id);
                    } else if (f) {
                        next = index_.query_structured(*f, actor, ctx);
                    } else {
                        throw Error(ErrorCode::BadArgs, "Retrieve needs ids, prompt, filter or query");
                    }
                }
                ws = std::move(next);
                sr.detail = "retrieved " + std::to_string(ws.size());
                break;
            }
            case StepOp::Augment: {
                const auto text = a.at("text").get<std::string>();
                context_text = context_text.empty() ? text : join_text(context_text, text);
                sr.detail = "context tokens " + std::to_string(token_count(context_text));
                break;
            }
            case StepOp::Update: {
                need_targets();
                UpdateRequest req;
                req.mode = parse_update_mode(a.value("mode", std::string("Append")));
                if (req.mode == UpdateMode::Merge) throw Error(ErrorCode::BadArgs, "pipeline Update supports Append and Overwrite");
                req.content = a.contains("content") ? a.at("content").get<std::string>() : context_text;
                if (req.content.empty()) throw Error(ErrorCode::BadArgs, "Update has no content and no augmented context");
                req.label = a.value("label", std::string{});
                for (const auto& id : ws) {
                    MemCube c = lookup(id);
                    if (c.header.state.is_frozen()) throw Error(ErrorCode::FrozenViolation, id + " is frozen");
                    require_namespace_write(c.header.namespace_name, actor);
                    require(actor, c, ctx, AccessOp::Write);
                    req.cube_id = id;
                    req.expected_version = c.version();
                    stage(apply_update(std::move(c), req, actor, at, nullptr, lookup));
                }
                sr.detail = "updated " + std::to_string(ws.size());
                break;
            }
            case StepOp::Provenance: {
                need_targets();
                ProvenanceInput ev;
                ev.trigger = a.value("trigger", std::string("pipeline"));
                ev.context = a.value("context", std::string{});
                ev.model_id = a.value("model_id", std::string{});
                ev.external_links = a.value("external_links", std::vector<std::string>{});
                for (const auto& id : ws) {
                    MemCube c = lookup(id);
                    require(actor, c, ctx, AccessOp::Write);
                    stage(apply_provenance(std::move(c), ev, actor, at));
                }
                sr.detail = "provenance " + std::to_string(ws.size());
                break;
            }
            case StepOp::Archive: {
                need_targets();
                for (const auto& id : ws) {
                    MemCube c = lookup(id);
                    if (!c.header.state.is_frozen()) require(actor, c, ctx, AccessOp::Write);
                    stage(memkernel::transition(c, LifecycleEvent::of(EventKind::ArchiveRequest), at, actor).cube);
                }
                sr.detail = "archived " + std::to_string(ws.size());
                break;
            }
            }
            sr.working_set = ws;
            sr.audit_seq = record(step_audit_op(st.op), label, ws.size() == 1 ? ws.front() : CubeId{}, nullptr);
            res.steps.push_back(std::move(sr));
        } catch (const std::exception& ex) {
            const auto* err = dynamic_cast<const Error*>(&ex);
            const Error wrapped = err != nullptr ? *err : Error(ErrorCode::Internal, ex.what());
            const Error bad = dynamic_cast<const Json::exception*>(&ex) != nullptr ? Error(ErrorCode::BadArgs, ex.what()) : wrapped;
            sr.ok = false;
            sr.error = bad.code();
            sr.detail = bad.what();
            sr.working_set = ws;
            sr.audit_seq = record(step_audit_op(st.op), label, ws.size() == 1 ? ws.front() : CubeId{}, &bad);
            res.steps.push_back(std::move(sr));
            res.error = ErrorCode::StepFailed;
            res.failed_step = st.name;
            res.message = "step '" + st.name + "' failed: " + std::string(bad.what());
            res.working_set = ws;
            return res;
        }
    }

    // Commit the staged overlay. Bases are re-checked under the namespace
    // locks so a concurrent writer aborts the whole pipeline.
    std::set<std::string> spaces;
    for (const auto& [id, c] : overlay) spaces.insert(c.header.namespace_name);
    auto lk = lock_namespaces(spaces);
    for (const auto& [id, before] : base) {
        const auto cur = vault_.find(id);
        if (!cur || cur->cube != before) {
            res.error = ErrorCode::StepFailed;
            res.failed_step = "commit";
            res.message = "cube " + id + " changed while the pipeline ran";
            res.working_set = ws;
            return res;
        }
    }
    for (const auto& [id, c] : overlay) commit(c);
    res.committed = true;
    res.working_set = ws;
    return res;
}

std::string Kernel::dump(const StructuredFilter& selection, const DumpPolicy& policy, const Identity& actor,
                         const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Export, "dump", {}, [&](Call& call) {
        selection.check();
        std::vector<MemCube> cubes;
        std::set<CubeId> ids;
        for (auto& s : vault_.all()) {
            if (!selection.matches(s.cube)) continue;
            const auto d = decide_access(actor, s.cube, ctx, AccessOp::Export);
            if (!d.allowed) throw Error(ErrorCode::AccessDenied, s.cube.cube_id + ": " + d.reason);
            ids.insert(s.cube.cube_id);
            cubes.push_back(std::move(s.cube));
        }
        std::vector<AuditRecord> excerpt;
        if (policy.include_audit) {
            for (auto& r : audit_->records()) {
                if (ids.contains(r.cube_id)) excerpt.push_back(std::move(r));
            }
        }
        auto bytes = build_archive(cubes, redactor_, config_.deployment_id, actor, now(), excerpt, *embedder_);
        call.rec.detail += " cubes=" + std::to_string(cubes.size());
        if (cubes.empty()) call.rec.detail += " EmptySelection";
        return bytes;
    });
}

std::vector<CubeId> Kernel::load(std::string_view archive, const std::string& target_ns, const Identity& actor,
                                 const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Import, "load", {}, [&](Call& call) {
        vault_.ns(target_ns);
        require_namespace_write(target_ns, actor);
        const Archive a = decode_archive(archive);
        auto lk = lock_namespaces({target_ns});
        auto cubes = import_archive(a, target_ns, *ids_, actor, now());
        std::vector<CubeId> out;
        for (const auto& c : cubes) {
            commit(c);
            out.push_back(c.cube_id);
        }
        call.rec.detail += " cubes=" + std::to_string(out.size()) + " from=" + a.manifest.source_deployment;
        return out;
    });
}

PublishResult Kernel::publish(const CubeId& id, const Visibility& visibility, const License& license,
                              const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Publish, "publish", id, [&](Call& call) {
        const MemCube cube = load_cube(id);
        if (actor != cube.header.acl.owner) throw Error(ErrorCode::AccessDenied, "NOT_OWNER");
        license.check();
        MemCube snap = redactor_.redact(cube, *embedder_);
        if (redactor_.matches_any(canonical_encode(snap))) {
            throw Error(ErrorCode::ValidationFailed, "listing still matches an active sensitivity rule");
        }
        const Timestamp at = now();
        Listing l{"lst-" + ids_->next(at), std::move(snap), visibility, license, actor, at};
        exchange_->publish(l);
        PublishResult r{l, exchange_->notify(l.listing_id)};
        call.rec.detail += " listing=" + l.listing_id + " deliveries=" + std::to_string(r.deliveries.size());
        return r;
    });
}

PullReceipt Kernel::pull(const std::string& listing_id, const std::optional<std::string>& fee_token,
                         const std::optional<std::string>& install_ns, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Pull, "pull", {}, [&](Call& call) {
        call.rec.detail += " listing=" + listing_id;
        if (install_ns) {
            vault_.ns(*install_ns);
            require_namespace_write(*install_ns, actor);
        }
        const Timestamp at = now();
        PullReceipt r = exchange_->pull(listing_id, actor, at, fee_token);
        call.rec.cube_id = r.snapshot.cube_id;
        call.rec.memory_kind = r.snapshot.header.memory_kind;
        call.rec.detail += " call=" + std::to_string(r.call_number) + "/" +
                           (r.max_calls ? std::to_string(*r.max_calls) : std::string("unlimited"));
        if (install_ns) {
            Archive a;
            a.manifest.source_deployment = "exchange/" + listing_id;
            a.manifest.cube_count = 1;
            a.entries.push_back(ArchiveEntry{r.snapshot, Json::object()});
            auto lk = lock_namespaces({*install_ns});
            auto cubes = import_archive(a, *install_ns, *ids_, actor, at);
            commit(cubes.front());
            call.rec.detail += " installed=" + cubes.front().cube_id;
            r.snapshot = cubes.front();
        }
        return r;
    });
}

std::string Kernel::subscribe(Subscription subscription, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Publish, "subscribe", {}, [&](Call& call) {
        subscription.subscriber = actor;
        subscription.created_at = now();
        auto id = exchange_->subscribe(std::move(subscription));
        call.rec.detail += " " + id;
        return id;
    });
}

std::vector<Delivery> Kernel::notify(const std::string& listing_id, const Identity& actor, const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Publish, "notify", {}, [&](Call& call) {
        auto out = exchange_->notify(listing_id);
        call.rec.detail += " listing=" + listing_id + " deliveries=" + std::to_string(out.size());
        return out;
    });
}

std::vector<std::string> Kernel::inbox(const std::string& subscription_id, const Identity& actor,
                                       const CallContext& ctx)
{
    return audited(actor, ctx, AuditOp::Read, "inbox", {}, [&](Call&) {
        const auto s = exchange_->subscription(subscription_id);
        if (!s) throw Error(ErrorCode::UnknownSubscription, subscription_id);
        if (s->subscriber != actor) throw Error(ErrorCode::AccessDenied, "NOT_SUBSCRIBER");
        return exchange_->inbox(subscription_id);
    });
}

}  // namespace memkernel
