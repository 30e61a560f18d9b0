// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion. Each check states its
// own oracle and reuses nothing from the code under test beyond the public
// API it exercises.
//
//   acceptance [--only ID]... [--expect-fail ID]...
//
// Exit status is 0 when the set of failing criteria equals the set named by
// --expect-fail, so a known failure still prints FAIL but does not mask new
// regressions (or an unexpected fix).

#include "support.hpp"

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"
#include "memkernel/harness/cost_model.hpp"
#include "memkernel/harness/engine.hpp"
#include "memkernel/harness/replay.hpp"
#include "memkernel/interchange/interchange.hpp"
#include "memkernel/interface/kernel.hpp"
#include "memkernel/lifecycle/lifecycle.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace memkernel {
namespace {

namespace fs = std::filesystem;
using testing::t0;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first few failure messages; counts the rest.
class Checker {
public:
    void expect(bool ok, const std::string& what)
    {
        if (ok) return;
        ++failures_;
        if (messages_.size() < 3) messages_.push_back(what);
    }
    bool ok() const { return failures_ == 0; }
    std::size_t failures() const { return failures_; }
    Outcome outcome(const std::string& summary) const
    {
        if (ok()) return {true, summary};
        std::string d = summary + "; " + std::to_string(failures_) + " violation(s): ";
        for (std::size_t i = 0; i < messages_.size(); ++i) d += (i ? " | " : "") + messages_[i];
        return {false, d};
    }

private:
    std::size_t failures_ = 0;
    std::vector<std::string> messages_;
};

CallContext ctx() { return CallContext{"acc", "acceptance", "test", {}}; }

std::string fmt(double v, int digits = 2)
{
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

NamespaceDescriptor mem_ns(const std::string& name)
{
    NamespaceDescriptor d;
    d.name = name;
    return d;
}

NamespaceDescriptor file_ns(const std::string& name, const fs::path& dir)
{
    NamespaceDescriptor d;
    d.name = name;
    d.adapter.backend = BackendKind::FileLog;
    d.adapter.directory = dir;
    return d;
}

// A kernel on an injected clock.
struct Rig {
    explicit Rig(KernelConfig cfg, const std::vector<NamespaceDescriptor>& spaces, Timestamp start = t0())
        : clock(start), kernel(std::move(cfg), clock)
    {
        for (const auto& d : spaces) kernel.open_namespace(d);
    }
    ManualClock clock;
    Kernel kernel;
};

KernelConfig seeded(std::uint64_t seed, const std::string& deployment = "acceptance")
{
    KernelConfig c;
    c.id_seed = seed;
    c.deployment_id = deployment;
    return c;
}

CubeDraft draft(const std::string& text, const std::string& ns, std::set<std::string> tags = {})
{
    CubeDraft d;
    d.payload = PlaintextPayload{text, {}};
    d.namespace_name = ns;
    d.semantic_type = "fact";
    d.tags = std::move(tags);
    return d;
}

std::vector<std::string> split_ws(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

bool code_is(const std::function<void()>& f, ErrorCode want)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code() == want;
    }
    return false;
}

// ---- 1. lifecycle FSM ----

using SE = std::pair<StateKind, EventKind>;

// The transition table as listed, written out by hand.
const std::map<SE, StateKind>& listed_table()
{
    using S = StateKind;
    using E = EventKind;
    static const std::map<SE, StateKind> t{
        {{S::Generated, E::Access}, S::Activated},        {{S::Activated, E::Access}, S::Activated},
        {{S::Generated, E::MergeInto}, S::Merged},        {{S::Activated, E::MergeInto}, S::Merged},
        {{S::Generated, E::ArchiveRequest}, S::Archived}, {{S::Activated, E::ArchiveRequest}, S::Archived},
        {{S::Merged, E::ArchiveRequest}, S::Archived},    {{S::Archived, E::RestoreRequest}, S::Activated},
        {{S::Generated, E::Freeze}, S::Frozen},           {{S::Activated, E::Freeze}, S::Frozen},
        {{S::Merged, E::Freeze}, S::Frozen},              {{S::Archived, E::Freeze}, S::Frozen},
    };
    return t;
}

constexpr StateKind kStates[] = {StateKind::Generated, StateKind::Activated, StateKind::Merged,
                                 StateKind::Archived,  StateKind::Expired,   StateKind::Frozen};

class MapHistory final : public PayloadHistory {
public:
    void record(const MemCube& c) { payloads_[{c.cube_id, c.version()}] = c.payload; }
    std::optional<MemoryPayload> payload_at(const CubeId& id, std::uint64_t v) const override
    {
        const auto it = payloads_.find({id, v});
        if (it == payloads_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::map<std::pair<CubeId, std::uint64_t>, MemoryPayload> payloads_;
};

LifecycleEvent event_for(EventKind e, std::uint64_t restore_version = 1)
{
    switch (e) {
    case EventKind::MergeInto:
        return LifecycleEvent::merge_into("another-cube");
    case EventKind::RestoreRequest:
        return LifecycleEvent::restore(restore_version);
    default:
        return LifecycleEvent::of(e);
    }
}

// Tick outcome from the lifespan rules: strict TTL wins, then idle archiving.
StateKind tick_oracle(const MemCube& c, Timestamp now)
{
    const auto& h = c.header;
    const StateKind s = h.state.kind;
    if (s == StateKind::Frozen || s == StateKind::Expired || h.lifespan.mode == LifespanMode::Permanent) return s;
    if (h.lifespan.mode == LifespanMode::TtlSeconds && now.micros > h.created_at.micros + h.lifespan.seconds * 1'000'000) {
        return StateKind::Expired;
    }
    if (h.lifespan.archive_after_idle_seconds && s != StateKind::Archived &&
        now.micros > h.last_access.micros + *h.lifespan.archive_after_idle_seconds * 1'000'000) {
        return StateKind::Archived;
    }
    return s;
}

Outcome check_fsm()
{
    Checker ck;
    IdGenerator ids(11);
    const auto& table = listed_table();

    // Static table and live transitions, every (state, event) pair.
    std::size_t accepted = 0, rejected = 0;
    for (const StateKind s : kStates) {
        for (const EventKind e : kAllEvents) {
            const bool listed =
                e == EventKind::Tick || table.contains({s, e}) || (s == StateKind::Frozen && e == EventKind::Unfreeze);
            ck.expect(table_accepts(s, e) == listed,
                      "table_accepts(" + std::string(to_string(s)) + "," + std::string(to_string(e)) + ")");
            MemCube c = testing::make_cube(ids, "fsm probe");
            MapHistory history;
            history.record(c);
            c.header.state = s == StateKind::Frozen ? LifecycleState::frozen(StateKind::Activated) : LifecycleState::of(s);
            bool ok = true;
            StateKind to = s;
            try {
                to = transition(c, event_for(e), t0().plus_seconds(1), "alice", &history).to.kind;
            } catch (const Error&) {
                ok = false;
            }
            ck.expect(ok == listed, "live " + std::string(to_string(s)) + " x " + std::string(to_string(e)));
            if (ok && e != EventKind::Tick) {
                const StateKind want = s == StateKind::Frozen ? StateKind::Activated : table.at({s, e});
                ck.expect(to == want, "target of " + std::string(to_string(s)) + " x " + std::string(to_string(e)));
            }
            (ok ? accepted : rejected)++;
        }
    }

    // Random walk. Every step is checked against the table and the tick rule;
    // Expired must absorb and Frozen must leave the cube untouched.
    std::mt19937_64 rng(2026);
    const auto fresh = [&](Timestamp at) {
        CubeDraft d = draft("walk " + std::to_string(rng() % 1000), "clinic");
        d.acl = AccessPolicy::private_to("alice");
        const int p = static_cast<int>(rng() % 3);
        if (p == 0) d.lifespan = LifespanPolicy::ttl(static_cast<std::int64_t>(200 + rng() % 4000));
        if (p == 1) {
            d.lifespan = LifespanPolicy{LifespanMode::DecayHalfLifeSeconds, 3600, static_cast<std::int64_t>(300 + rng() % 900)};
        }
        CreateContext cc;
        cc.cube_id = ids.next(at);
        cc.now = at;
        cc.actor = "alice";
        return create_cube(d, cc);
    };
    Timestamp now = t0();
    MapHistory history;
    MemCube cube = fresh(now);
    history.record(cube);
    std::size_t expired_steps = 0, frozen_steps = 0, moves = 0;
    for (int step = 0; step < 10'000; ++step) {
        now = now.plus_seconds(static_cast<std::int64_t>(rng() % 300));
        const EventKind e = kAllEvents[rng() % std::size(kAllEvents)];
        const std::uint64_t rv = 1 + rng() % (cube.version() + 1);
        const StateKind s = cube.header.state.kind;
        const bool frozen = cube.header.state.is_frozen();
        std::optional<TransitionResult> r;
        ErrorCode code = ErrorCode::Internal;
        try {
            r = transition(cube, event_for(e, rv), now, "alice", &history);
        } catch (const Error& err) {
            code = err.code();
        }
        const std::string where = "step " + std::to_string(step) + " " + std::string(to_string(s)) + " x " +
                                  std::string(to_string(e));
        if (s == StateKind::Expired) {
            ++expired_steps;
            ck.expect(e == EventKind::Tick ? (r && r->to.kind == StateKind::Expired) : !r, "absorbing " + where);
        } else if (frozen) {
            ++frozen_steps;
            if (e == EventKind::Unfreeze) {
                ck.expect(r && payload_digest(r->cube.payload) == payload_digest(cube.payload) &&
                              r->cube.header.version_chain == cube.header.version_chain,
                          "unfreeze " + where);
            } else if (e == EventKind::Tick) {
                ck.expect(r && r->cube.header.state == cube.header.state, "frozen tick " + where);
            } else {
                ck.expect(!r && code == ErrorCode::FrozenViolation, "frozen mutation " + where);
            }
        } else if (e == EventKind::Tick) {
            ck.expect(r && r->to.kind == tick_oracle(cube, now), "tick " + where);
        } else if (table.contains({s, e})) {
            const bool bad_version = e == EventKind::RestoreRequest && rv > cube.version();
            if (bad_version) {
                ck.expect(!r && code == ErrorCode::UnknownVersion, "restore version " + where);
            } else {
                ck.expect(r && r->to.kind == table.at({s, e}), "listed " + where);
            }
        } else {
            ck.expect(!r, "unlisted accepted " + where);
        }
        if (r) {
            if (!(r->to == r->from)) ++moves;
            cube = r->cube;
            history.record(cube);
        }
        // Restart after lingering in Expired so the walk keeps covering live states.
        if (cube.header.state.kind == StateKind::Expired && rng() % 20 == 0) {
            cube = fresh(now);
            history.record(cube);
        }
    }
    return ck.outcome("48 pairs (" + std::to_string(accepted) + " accepted, " + std::to_string(rejected) +
                      " rejected), 10^4-step walk with " + std::to_string(moves) + " moves, " +
                      std::to_string(expired_steps) + " steps in Expired, " + std::to_string(frozen_steps) +
                      " in Frozen");
}

// ---- 2. retrieval oracle ----

// Readability written from the policy statement.
bool oracle_readable(const Identity& a, const MemCube& c)
{
    const auto& acl = c.header.acl;
    if (a == acl.owner) return true;
    const bool reader = acl.readers_wildcard || acl.readers.count(a) == 1;
    const bool scope_ok = acl.share_scope == ShareScope::Shared || acl.share_scope == ShareScope::ReadOnly;
    const bool layer_ok = c.header.layer == MemoryLayer::Shared || c.header.layer == MemoryLayer::Global;
    return reader || (scope_ok && layer_ok);
}

// Tag predicate built as data, so it is evaluated without TagExpr.
struct TagPred {
    int shape = 0;  // 0: a, 1: a AND b, 2: a OR b, 3: a AND NOT b
    std::string a, b;
    std::string text() const
    {
        switch (shape) {
        case 1: return a + " AND " + b;
        case 2: return a + " OR " + b;
        case 3: return a + " AND NOT " + b;
        default: return a;
        }
    }
    bool eval(const std::set<std::string>& t) const
    {
        const bool ha = t.count(a) == 1, hb = t.count(b) == 1;
        switch (shape) {
        case 1: return ha && hb;
        case 2: return ha || hb;
        case 3: return ha && !hb;
        default: return ha;
        }
    }
};

struct OracleHit {
    CubeId id;
    double score;
};

std::vector<OracleHit> oracle_rank(const std::vector<MemCube>& cubes, const std::map<CubeId, std::string>& texts,
                                   const std::string& query, std::size_t k)
{
    const auto q = testing::oracle_fingerprint(query);
    struct Row {
        CubeId id;
        double score;
        long long key;
        std::int64_t updated;
    };
    std::vector<Row> rows;
    for (const auto& c : cubes) {
        const auto v = testing::oracle_fingerprint(texts.at(c.cube_id));
        double s = 0;
        for (std::size_t i = 0; i < q.size(); ++i) s += q[i] * v[i];
        rows.push_back({c.cube_id, s, std::llround(s * 1e9), c.header.updated_at.micros});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
        if (x.key != y.key) return x.key > y.key;
        if (x.updated != y.updated) return x.updated > y.updated;
        return x.id < y.id;
    });
    std::vector<OracleHit> out;
    for (std::size_t i = 0; i < rows.size() && i < k; ++i) out.push_back({rows[i].id, rows[i].score});
    return out;
}

Outcome check_retrieval()
{
    Checker ck;
    Rig rig(seeded(21), {mem_ns("clinic")});
    std::mt19937_64 rng(21);
    const auto& vocab = testing::vocabulary();
    std::map<CubeId, std::string> texts;
    const std::vector<Identity> owners{"alice", "alice", "alice", "bob"};
    for (int i = 0; i < 200; ++i) {
        const Identity owner = owners[rng() % owners.size()];
        std::set<std::string> tags;
        for (int t = 0; t < 3; ++t) tags.insert(vocab[rng() % 8]);
        std::string text = testing::random_text(rng, 2, 6);
        if (i % 17 == 0 && !texts.empty()) text = texts.begin()->second;  // exact duplicates exercise tie order
        CubeDraft d = draft(text, "clinic", tags);
        d.acl = AccessPolicy::private_to(owner);
        if (owner == "bob" && rng() % 2) {
            d.acl.share_scope = ShareScope::Shared;
            d.layer = MemoryLayer::Shared;
        }
        if (rng() % 3 == 0) rig.clock.advance_seconds(1);
        texts[rig.kernel.create(std::move(d), owner, ctx()).cube_id] = text;
    }

    const auto visible = [&](const Identity& actor) {
        std::vector<MemCube> out;
        for (const auto& s : rig.kernel.vault().all()) {
            if (oracle_readable(actor, s.cube)) out.push_back(s.cube);
        }
        return out;
    };
    const auto compare = [&](const std::vector<RankedHit>& got, const std::vector<OracleHit>& want, const std::string& what) {
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = got[i].cube_id == want[i].id && std::abs(got[i].score - want[i].score) < 1e-9;
        }
        ck.expect(same, what);
    };

    const auto started = std::chrono::steady_clock::now();
    std::size_t queries = 0;
    for (const Identity actor : {"alice", "bob", "carol"}) {
        for (int q = 0; q < 20; ++q, queries += 3) {
            const std::string text = testing::random_text(rng, 1, 4);
            TagPred pred{static_cast<int>(rng() % 4), vocab[rng() % 8], vocab[rng() % 8]};
            StructuredFilter f;
            f.tags = TagExpr::parse(pred.text());
            const bool with_time = rng() % 2 == 0;
            const Timestamp from = t0().plus_seconds(static_cast<std::int64_t>(rng() % 40));
            const Timestamp to = from.plus_seconds(static_cast<std::int64_t>(10 + rng() % 40));
            if (with_time) {
                f.from = from;
                f.to = to;
            }
            const auto pool = visible(actor);
            std::vector<MemCube> narrowed;
            std::vector<CubeId> structured;
            for (const auto& c : pool) {
                const bool in_time = !with_time || (c.header.created_at >= from && c.header.created_at < to);
                if (pred.eval(c.header.tags) && in_time) {
                    narrowed.push_back(c);
                    structured.push_back(c.cube_id);
                }
            }
            std::sort(structured.begin(), structured.end());
            const std::string where = actor + std::string(" q") + std::to_string(q);
            ck.expect(rig.kernel.query_structured(f, actor, ctx()) == structured, "structured " + where);
            compare(rig.kernel.query_semantic(text, 20, actor, ctx()), oracle_rank(pool, texts, text, 20), "semantic " + where);
            compare(rig.kernel.query_hybrid(f, text, 20, actor, ctx()), oracle_rank(narrowed, texts, text, 20),
                    "hybrid " + where);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    ck.expect(secs < 5.0, "runtime " + fmt(secs) + " s");
    return ck.outcome("200 cubes, " + std::to_string(queries) + " queries (k=20) over 3 actors agree with brute-force scan in " +
                      fmt(secs, 3) + " s");
}

// ---- 3. version time machine ----

Outcome check_time_machine()
{
    Checker ck;
    Rig rig(seeded(31), {mem_ns("clinic")});
    std::mt19937_64 rng(31);
    std::size_t ok_trials = 0, ops = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Kernel& k = rig.kernel;
        rig.clock.advance_seconds(5);
        const MemCube c = k.create(draft(testing::random_text(rng), "clinic"), "alice", ctx());
        std::map<std::uint64_t, std::string> payloads{{1, canonical_payload(c.payload)}};
        bool trial_ok = true;
        std::uint64_t version = 1;
        const int steps = 2 + static_cast<int>(rng() % 10);
        for (int s = 0; s < steps; ++s, ++ops) {
            rig.clock.advance_seconds(1);
            UpdateRequest u;
            u.cube_id = c.cube_id;
            u.expected_version = version;
            const int m = static_cast<int>(rng() % 3);
            if (m == 0) u.mode = UpdateMode::Append;
            if (m == 1) u.mode = UpdateMode::Overwrite;
            if (m == 2) {
                u.mode = UpdateMode::Merge;
                for (int n = 1 + static_cast<int>(rng() % 2); n > 0; --n) {
                    u.sources.push_back(k.create(draft(testing::random_text(rng), "clinic"), "alice", ctx()).cube_id);
                }
            }
            u.content = testing::random_text(rng);
            const auto v = k.update(u, "alice", ctx());
            const MemCube now = k.vault().find(c.cube_id)->cube;
            trial_ok &= v == version + 1 && now.version() == v && now.header.version_chain.size() == v;
            version = v;
            payloads[v] = canonical_payload(now.payload);
        }
        const MemCube before = k.vault().find(c.cube_id)->cube;
        const std::uint64_t target = 1 + rng() % version;
        rig.clock.advance_seconds(1);
        const MemCube back = k.rollback(c.cube_id, target, "alice", ctx());
        trial_ok &= canonical_payload(back.payload) == payloads.at(target);
        trial_ok &= payload_digest(back.payload) == sha256(std::string_view(payloads.at(target)));
        trial_ok &= back.version() == version + 1 && back.header.version_chain.size() == version + 1;
        trial_ok &= std::equal(before.header.version_chain.begin(), before.header.version_chain.end(),
                               back.header.version_chain.begin());
        trial_ok &= back.header.version_chain.back().op == VersionOp::Rollback;
        ck.expect(trial_ok, "trial " + std::to_string(trial));
        ok_trials += trial_ok;
    }
    return ck.outcome(std::to_string(ok_trials) + "/100 rollbacks byte-exact after " + std::to_string(ops) +
                      " Append/Overwrite/Merge updates; chain lengths exact");
}

// ---- 4. governance ----

const char* kSsn = "[0-9]{3}-[0-9]{2}-[0-9]{4}";

Outcome check_governance()
{
    Checker ck;
    KernelConfig cfg = seeded(41, "gov");
    cfg.ruleset.id = "ssn-v1";
    cfg.ruleset.rules.push_back({"ssn", kSsn});
    Rig rig(cfg, {mem_ns("clinic"), mem_ns("lab")});
    Kernel& k = rig.kernel;
    std::mt19937_64 rng(41);
    const std::vector<Identity> actors{"alice", "bob", "carol", "dave"};
    const std::vector<std::string> spaces{"clinic", "lab"};
    const auto& vocab = testing::vocabulary();
    std::vector<CubeId> ids;
    std::size_t leaks = 0, checked_hits = 0, dumps = 0, redaction_hits = 0, errors = 0;
    const std::regex ssn(kSsn);

    const auto leak_check = [&](const Identity& actor, const CubeId& id) {
        ++checked_hits;
        const auto s = k.vault().find(id);
        if (!s || !oracle_readable(actor, s->cube)) {
            ++leaks;
            ck.expect(false, actor + " saw " + id);
        }
    };
    const auto ssn_text = [&] {
        return std::to_string(100 + rng() % 900) + "-" + std::to_string(10 + rng() % 90) + "-" +
               std::to_string(1000 + rng() % 9000);
    };

    const std::uint64_t first = k.audit().size();
    constexpr int kCalls = 1000;
    for (int call = 0; call < kCalls; ++call) {
        rig.clock.advance_seconds(static_cast<std::int64_t>(rng() % 30));
        const Identity actor = actors[rng() % actors.size()];
        const std::string ns = spaces[rng() % spaces.size()];
        const int op = ids.size() < 10 ? 0 : static_cast<int>(rng() % 12);
        const CubeId target = ids.empty() ? "missing" : ids[rng() % ids.size()];
        const StructuredFilter tag_filter = [&] {
            StructuredFilter f;
            f.tags = TagExpr::term(vocab[rng() % 6]);
            return f;
        }();
        try {
            switch (op) {
            case 0: {
                std::string text = testing::random_text(rng);
                if (rng() % 2) text += " id " + ssn_text();
                std::set<std::string> tags{vocab[rng() % 6], vocab[rng() % 6]};
                CubeDraft d = draft(text, ns, tags);
                d.acl = AccessPolicy::private_to(actor);
                const int share = static_cast<int>(rng() % 4);
                if (share == 1) d.acl.readers.insert(actors[rng() % actors.size()]);
                if (share == 2) {
                    d.acl.share_scope = ShareScope::Shared;
                    d.layer = MemoryLayer::Shared;
                }
                if (share == 3) d.acl.share_scope = ShareScope::Shared;  // scope without a shared layer stays private
                ids.push_back(k.create(std::move(d), actor, ctx()).cube_id);
                break;
            }
            case 1:
                k.get(target, actor, ctx());
                leak_check(actor, target);
                break;
            case 2:
                for (const auto& id : k.list(ns, tag_filter, actor, ctx())) leak_check(actor, id);
                break;
            case 3:
                for (const auto& id : k.query_structured(tag_filter, actor, ctx())) leak_check(actor, id);
                break;
            case 4:
                for (const auto& h : k.query_semantic(testing::random_text(rng, 1, 3), 20, actor, ctx())) {
                    leak_check(actor, h.cube_id);
                }
                break;
            case 5:
                for (const auto& h : k.query_hybrid(tag_filter, testing::random_text(rng, 1, 3), 20, actor, ctx())) {
                    leak_check(actor, h.cube_id);
                }
                break;
            case 6: {
                UpdateRequest u;
                u.cube_id = target;
                u.mode = UpdateMode::Append;
                u.content = rng() % 2 ? testing::random_text(rng) : "note " + ssn_text();
                const auto s = k.vault().find(target);
                u.expected_version = s ? s->cube.version() - (rng() % 4 == 0 ? 1 : 0) : 1;
                k.update(u, actor, ctx());
                break;
            }
            case 7: {
                const EventKind e = kAllEvents[rng() % std::size(kAllEvents)];
                k.transition(target, event_for(e), actor, ctx());
                break;
            }
            case 8: {
                ++dumps;
                const std::string bytes = k.dump(tag_filter, DumpPolicy{rng() % 2 == 0}, actor, ctx());
                const auto n = std::distance(std::sregex_iterator(bytes.begin(), bytes.end(), ssn), std::sregex_iterator());
                redaction_hits += static_cast<std::size_t>(n);
                ck.expect(n == 0, "dump by " + actor + " leaked an identifier");
                for (const auto& e : decode_archive(bytes).entries) leak_check(actor, e.cube.cube_id);
                break;
            }
            case 9: {
                const auto plan = k.plan(testing::random_text(rng, 1, 3), 200 + rng() % 800, 20, actor, ctx());
                for (const auto& i : plan.plaintext_items) leak_check(actor, i.cube_id);
                for (const auto& i : plan.activation_items) leak_check(actor, i.cube_id);
                break;
            }
            case 10:
                k.audit_query(AuditFilter{}, actor, ctx());
                break;
            default:
                for (const auto& step : k.resolve_path("find the " + vocab[rng() % 8] + " notes", actor, ctx()).steps) {
                    (void)step;
                }
                break;
            }
        } catch (const Error&) {
            ++errors;
        }
        ck.expect(k.audit().size() == first + static_cast<std::uint64_t>(call) + 1,
                  "call " + std::to_string(call) + " wrote " + std::to_string(k.audit().size() - first - call) + " records");
    }
    const auto records = k.audit().records();
    ck.expect(records.size() == kCalls, "record count " + std::to_string(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        ck.expect(records[i].seq == first + i + 1, "seq gap at " + std::to_string(i));
    }
    return ck.outcome(std::to_string(kCalls) + " calls (" + std::to_string(errors) + " errors) -> " +
                      std::to_string(records.size()) + " gapless audit records; " + std::to_string(leaks) +
                      " ACL leaks over " + std::to_string(checked_hits) + " returned cubes; " +
                      std::to_string(redaction_hits) + " identifier matches in " + std::to_string(dumps) + " dumps");
}

// ---- 5. scheduler ----

Outcome check_scheduler()
{
    Checker ck;
    const std::string long_text = "Stable and frequently accessed summary of the weekly planning meeting notes";
    {
        KernelConfig cfg = seeded(51);
        cfg.rule.theta_promote = 5;
        Rig rig(cfg, {mem_ns("clinic")});
        Kernel& k = rig.kernel;
        const auto hot = k.create(draft(long_text, "clinic"), "alice", ctx()).cube_id;
        const auto warm = k.create(draft(long_text + " again", "clinic"), "alice", ctx()).cube_id;
        for (int i = 0; i < 5; ++i) {
            rig.clock.advance_seconds(30);
            k.get(hot, "alice", ctx());
            if (i < 4) k.get(warm, "alice", ctx());
        }
        const MemCube twin = k.promote(hot, "alice", ctx());
        ck.expect(twin.activation() != nullptr && twin.activation()->source_cube == hot, "5 accesses did not promote");
        ck.expect(k.twin_of(hot) == twin.cube_id, "twin_of after promotion");
        ck.expect(code_is([&] { k.promote(warm, "alice", ctx()); }, ErrorCode::PreconditionNotMet), "4 accesses promoted");
        ck.expect(!k.twin_of(warm), "twin exists after 4 accesses");
    }

    // Fuzzed plans on a corpus where some cubes have twins.
    KernelConfig cfg = seeded(52);
    Rig rig(cfg, {mem_ns("clinic")});
    Kernel& k = rig.kernel;
    std::mt19937_64 rng(52);
    std::vector<CubeId> ids;
    std::map<CubeId, std::size_t> tokens;
    for (int i = 0; i < 60; ++i) {
        const std::string text = testing::random_text(rng, 3, 40);
        const auto id = k.create(draft(text, "clinic"), "alice", ctx()).cube_id;
        ids.push_back(id);
        tokens[id] = split_ws(text).size();
    }
    std::map<CubeId, CubeId> source_of;
    for (std::size_t i = 0; i < 12; ++i) {
        for (int a = 0; a < 5; ++a) {
            rig.clock.advance_seconds(20);
            k.get(ids[i * 5], "alice", ctx());
        }
        const MemCube t = k.promote(ids[i * 5], "alice", ctx());
        source_of[t.cube_id] = ids[i * 5];
        tokens[t.cube_id] = t.activation()->token_count;
    }
    std::size_t dual = 0, over = 0, plans = 0, twins_injected = 0;
    for (int p = 0; p < 1000; ++p, ++plans) {
        const std::uint64_t budget = 1 + rng() % 400;
        const auto plan = k.plan(testing::random_text(rng, 1, 5), budget, 1 + rng() % 30, "alice", ctx());
        std::set<CubeId> plain;
        std::uint64_t sum = 0;
        for (const auto& i : plan.plaintext_items) {
            plain.insert(i.cube_id);
            sum += i.token_count;
            ck.expect(i.token_count == tokens.at(i.cube_id), "token count of " + i.cube_id);
        }
        for (const auto& i : plan.activation_items) {
            sum += i.token_count;
            ++twins_injected;
            if (plain.contains(source_of.at(i.cube_id))) ++dual;
        }
        for (const auto& i : plan.parameter_modules) sum += i.token_count;
        if (sum > budget || plan.total_tokens != sum) ++over;
    }
    ck.expect(dual == 0, std::to_string(dual) + " plans injected a twin with its source");
    ck.expect(over == 0, std::to_string(over) + " plans over budget or misreported");

    // Eviction fuzz with frozen cubes.
    std::size_t trials = 0, evicted_total = 0, frozen_total = 0, frozen_lost = 0;
    for (int t = 0; t < 100; ++t, ++trials) {
        Rig e(seeded(600 + static_cast<std::uint64_t>(t)), {mem_ns("pool")});
        const int n = 5 + static_cast<int>(rng() % 30);
        std::map<CubeId, std::vector<VersionRecord>> frozen;
        for (int i = 0; i < n; ++i) {
            e.clock.advance_seconds(static_cast<std::int64_t>(rng() % 100));
            CubeDraft d = draft(testing::random_text(rng), "pool");
            d.priority = static_cast<int>(rng() % 100);
            const auto id = e.kernel.create(std::move(d), "alice", ctx()).cube_id;
            for (int a = static_cast<int>(rng() % 4); a > 0; --a) e.kernel.get(id, "alice", ctx());
            if (rng() % 3 == 0) {
                e.kernel.transition(id, LifecycleEvent::of(EventKind::Freeze), "alice", ctx());
                frozen[id] = e.kernel.vault().find(id)->cube.header.version_chain;
            }
        }
        frozen_total += frozen.size();
        const auto r = e.kernel.evict("pool", static_cast<std::size_t>(rng() % n), "alice", ctx());
        evicted_total += r.evicted.size();
        for (const auto& id : r.evicted) {
            ck.expect(!frozen.contains(id), "evicted frozen " + id);
            ck.expect(e.kernel.vault().find(id)->cube.header.state.kind == StateKind::Archived, "evicted not archived");
        }
        for (const auto& [id, chain] : frozen) {
            const auto s = e.kernel.vault().find(id);
            const bool kept = s && s->cube.header.state.is_frozen() && s->cube.header.version_chain == chain;
            frozen_lost += !kept;
            ck.expect(kept, "frozen cube changed by eviction");
        }
    }
    return ck.outcome("5 accesses promote, 4 do not; " + std::to_string(plans) + " fuzzed plans (" +
                      std::to_string(twins_injected) + " twin injections): 0 dual, 0 over budget; " +
                      std::to_string(trials) + " eviction trials evicted " + std::to_string(evicted_total) + ", " +
                      std::to_string(frozen_lost) + "/" + std::to_string(frozen_total) + " frozen touched");
}

// ---- 6. interchange ----

// Fields that load regenerates by definition: identity (and the provenance id
// derived from it), namespace, lifecycle position, version history, access
// bookkeeping and the import lineage event.
Json normalized(const ArchiveEntry& e)
{
    Json j = Json(e.cube);
    j.erase("cube_id");
    Json& h = j["header"];
    for (const char* f : {"namespace", "state", "version_chain", "updated_at", "last_access", "access_count"}) h.erase(f);
    h["compliance"].erase("lineage");
    h["compliance"].erase("provenance_id");
    Json p = e.permissions;
    p.erase("exported_by");
    return Json{{"cube", j}, {"permissions", p}};
}

Outcome check_interchange()
{
    Checker ck;
    std::mt19937_64 rng(61);
    const auto& vocab = testing::vocabulary();
    std::size_t cubes = 0;
    for (int corpus = 0; corpus < 50; ++corpus) {
        KernelConfig a_cfg = seeded(1000 + static_cast<std::uint64_t>(corpus), "site-a");
        a_cfg.ruleset.id = "ssn-v1";
        a_cfg.ruleset.rules.push_back({"ssn", kSsn});
        KernelConfig b_cfg = a_cfg;
        b_cfg.deployment_id = "site-b";
        b_cfg.id_seed += 5000;
        Rig a(a_cfg, {mem_ns("clinic")});
        Rig b(b_cfg, {mem_ns("imported")}, t0().plus_seconds(86'400));
        const int n = 1 + static_cast<int>(rng() % 30);
        for (int i = 0; i < n; ++i) {
            a.clock.advance_seconds(static_cast<std::int64_t>(rng() % 5));
            std::string text = testing::random_text(rng);
            if (rng() % 3 == 0) text += " ssn 123-45-" + std::to_string(1000 + rng() % 9000);
            CubeDraft d = draft(text, "clinic", {vocab[rng() % 8], vocab[rng() % 8]});
            d.priority = static_cast<int>(rng() % 100);
            d.layer = rng() % 2 ? MemoryLayer::Private : MemoryLayer::Shared;
            d.sensitivity = rng() % 4 == 0 ? std::set<std::string>{"phi"} : std::set<std::string>{};
            const auto id = a.kernel.create(std::move(d), "alice", ctx()).cube_id;
            if (rng() % 2) {
                UpdateRequest u{id, UpdateMode::Append, testing::random_text(rng), {}, 1, ""};
                a.kernel.update(u, "alice", ctx());
            }
        }
        cubes += static_cast<std::size_t>(n);
        const std::string first = a.kernel.dump(StructuredFilter{}, {}, "alice", ctx());
        b.kernel.load(first, "imported", "alice", ctx());
        const std::string second = b.kernel.dump(StructuredFilter{}, {}, "alice", ctx());
        const Archive x = decode_archive(first), y = decode_archive(second);
        std::multiset<std::string> lhs, rhs;
        for (const auto& e : x.entries) lhs.insert(canonical_dump(normalized(e)));
        for (const auto& e : y.entries) rhs.insert(canonical_dump(normalized(e)));
        ck.expect(lhs == rhs && x.entries.size() == static_cast<std::size_t>(n), "corpus " + std::to_string(corpus));
        ck.expect(x.manifest.cube_count == y.manifest.cube_count && x.manifest.ruleset_id == y.manifest.ruleset_id,
                  "manifest " + std::to_string(corpus));
    }

    // max_calls under 16 concurrent pullers.
    std::string license_summary;
    for (const std::uint64_t limit : {1ULL, 7ULL, 10ULL}) {
        Rig r(seeded(70 + limit), {mem_ns("clinic")});
        const auto id = r.kernel.create(draft("shared protocol for dosage review", "clinic"), "alice", ctx()).cube_id;
        License lic;
        lic.max_calls = limit;
        const auto listing = r.kernel.publish(id, Visibility{}, lic, "alice", ctx()).listing.listing_id;
        std::atomic<std::uint64_t> ok{0}, exhausted{0}, other{0};
        std::mutex mu;
        std::set<std::uint64_t> numbers;
        std::vector<std::thread> pool;
        for (int t = 0; t < 16; ++t) {
            pool.emplace_back([&] {
                for (int i = 0; i < 4; ++i) {
                    try {
                        const auto receipt = r.kernel.pull(listing, std::nullopt, std::nullopt, "bob", ctx());
                        ++ok;
                        std::lock_guard lk(mu);
                        numbers.insert(receipt.call_number);
                    } catch (const Error& e) {
                        (e.code() == ErrorCode::LicenseExhausted ? exhausted : other)++;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        std::set<std::uint64_t> want;
        for (std::uint64_t i = 1; i <= limit; ++i) want.insert(i);
        ck.expect(ok == limit && numbers == want && exhausted == 64 - limit && other == 0,
                  "max_calls=" + std::to_string(limit) + " admitted " + std::to_string(ok.load()));
        license_summary += (license_summary.empty() ? "" : ",") + std::to_string(ok.load()) + "/" + std::to_string(limit);
    }
    return ck.outcome("50 corpora (" + std::to_string(cubes) + " cubes) dump->load->dump equal modulo regenerated fields; "
                      "16x4 concurrent pulls admitted " + license_summary + " (N=1,7,10)");
}

// ---- 7. KV equivalence ----

Outcome check_kv()
{
    Checker ck;
    const std::array<std::string, 3> vocab{"a", "b", "c"};
    const auto sequences = [&](std::size_t max_len) {
        std::vector<std::vector<std::string>> out;
        for (std::size_t len = 0; len <= max_len; ++len) {
            std::size_t total = 1;
            for (std::size_t i = 0; i < len; ++i) total *= vocab.size();
            for (std::size_t code = 0; code < total; ++code) {
                std::vector<std::string> s;
                for (std::size_t c = code, i = 0; i < len; ++i, c /= vocab.size()) s.push_back(vocab[c % vocab.size()]);
                out.push_back(s);
            }
        }
        return out;
    };
    const auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (const auto& t : v) s += (s.empty() ? "" : " ") + t;
        return s;
    };
    const auto check_pair = [&](const std::string& memory, const std::string& query) {
        const auto r = run_dual_path(memory, query);
        auto all = split_ws(memory);
        const auto q = split_ws(query);
        all.insert(all.end(), q.begin(), q.end());
        const auto direct = mock_engine().generate(mock_engine().encode(all), kDefaultGenerateTokens);
        ck.expect(r.equal() && r.prompt_output == direct, "memory '" + memory + "' query '" + query + "'");
    };
    std::size_t exhaustive = 0;
    const auto mems = sequences(5);
    const auto qrys = sequences(3);
    for (const auto& m : mems) {
        for (const auto& q : qrys) {
            check_pair(join(m), join(q));
            ++exhaustive;
        }
    }
    std::mt19937_64 rng(71);
    for (int i = 0; i < 1000; ++i) check_pair(testing::random_text(rng, 0, 60), testing::random_text(rng, 0, 20));
    return ck.outcome(std::to_string(exhaustive) + " exhaustive pairs (|m|<=5, |q|<=3 over 3 tokens) and 1000 fuzzed pairs "
                      "give identical prompt and KV outputs");
}

// ---- 8. TTFT cost model ----

Outcome check_ttft()
{
    Checker ck;
    std::string per_model;
    double example = std::nan("");
    for (const auto& m : reference_ttft_models()) {
        const auto rows = rows_for(m);
        std::size_t within = 0;
        for (const auto& h : leave_one_out(rows)) {
            within += std::abs(h.error_pp) <= 10.0;
            if (m == "Qwen2.5-72B" && h.row.ctx_label == "long" && h.row.qry_label == "short") example = h.predicted_pct;
        }
        ck.expect(within >= 7, m + " LOO " + std::to_string(within) + "/9");
        per_model += (per_model.empty() ? "" : ", ") + m + " " + std::to_string(within) + "/9";
    }

    // Monotonicity of the full-block fits on the table grid, and agreement
    // with the ordering of each adjacent pair of reported speedups.
    std::size_t agree = 0, pairs = 0, monotone_violations = 0;
    std::string disagreements;
    for (const auto& m : reference_ttft_models()) {
        const auto rows = rows_for(m);
        const auto fit = fit_cost_model(rows, m);
        std::map<std::pair<std::string, std::string>, TtftRow> cell;
        for (const auto& r : rows) cell[{r.ctx_label, r.qry_label}] = r;
        const std::array<std::string, 3> ctx_order{"short", "medium", "long"};
        const std::array<std::string, 3> qry_order{"short", "medium", "long"};
        for (std::size_t i = 1; i < 3; ++i) {
            for (const auto& q : qry_order) {
                const auto& lo = cell.at({ctx_order[i - 1], q});
                const auto& hi = cell.at({ctx_order[i], q});
                const double plo = predict_speedup(fit, lo.ctx_tokens, lo.qry_tokens);
                const double phi = predict_speedup(fit, hi.ctx_tokens, hi.qry_tokens);
                monotone_violations += !(phi > plo);
                ++pairs;
                if ((phi > plo) == (hi.speedup_pct > lo.speedup_pct)) {
                    ++agree;
                } else {
                    disagreements += " " + m + " qry=" + q + " ctx " + ctx_order[i - 1] + "->" + ctx_order[i];
                }
            }
            for (const auto& c : ctx_order) {
                const auto& lo = cell.at({c, qry_order[i - 1]});
                const auto& hi = cell.at({c, qry_order[i]});
                const double plo = predict_speedup(fit, lo.ctx_tokens, lo.qry_tokens);
                const double phi = predict_speedup(fit, hi.ctx_tokens, hi.qry_tokens);
                monotone_violations += !(phi < plo);
                ++pairs;
                if ((phi < plo) == (hi.speedup_pct < lo.speedup_pct)) {
                    ++agree;
                } else {
                    disagreements += " " + m + " ctx=" + c + " qry " + qry_order[i - 1] + "->" + qry_order[i] + " (reported " +
                                     fmt(lo.speedup_pct, 1) + "->" + fmt(hi.speedup_pct, 1) + ")";
                }
            }
        }
    }
    ck.expect(monotone_violations == 0, std::to_string(monotone_violations) + " grid monotonicity violations");
    ck.expect(agree == pairs, "reported orderings matched " + std::to_string(agree) + "/" + std::to_string(pairs) + ":" +
                                  disagreements);
    return ck.outcome("LOO within 10pp: " + per_model + "; Qwen2.5-72B long/short predicted " + fmt(example, 1) +
                      "% (reported 91.4%); model monotone on grid; block orderings " + std::to_string(agree) + "/" +
                      std::to_string(pairs));
}

// ---- 9. not reproducible, substituted ----

WorkloadTrace planted_trace(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    static const std::vector<std::pair<std::string, std::string>> needles{
        {"warfarin interaction with ibuprofen flagged by pharmacist", "what did the pharmacist flag about warfarin and ibuprofen"},
        {"locker combination is marigold seven", "what is my locker combination"},
        {"flight to lisbon departs from gate twelve", "which gate does the lisbon flight leave from"},
        {"landlord approved the balcony herb garden", "did the landlord approve the herb garden"},
        {"vaccination booster scheduled with doctor okafor", "when is the booster with doctor okafor"},
    };
    WorkloadTrace trace{t0(), {}};
    double at = 0;
    for (int s = 0; s < 3; ++s) {
        TraceSession sess{"s" + std::to_string(s), "user", {}};
        for (int i = 0; i < 25; ++i) {
            TraceTurn t;
            t.at = at += 5;
            t.label = "f" + std::to_string(s) + "-" + std::to_string(i);
            t.text = testing::random_text(rng, 6, 14);
            sess.turns.push_back(t);
            if (i % 9 == 4) {
                const auto& [text, _] = needles[(s * 3 + i / 9 + seed) % needles.size()];
                TraceTurn n;
                n.at = at += 5;
                n.label = "needle-" + std::to_string(s) + "-" + std::to_string(i);
                n.text = text;
                sess.turns.push_back(n);
            }
        }
        trace.sessions.push_back(sess);
    }
    // Prompts in a final session refer back to every needle planted earlier.
    TraceSession ask{"ask", "user", {}};
    for (const auto& sess : trace.sessions) {
        for (const auto& t : sess.turns) {
            if (t.label.rfind("needle", 0) != 0) continue;
            for (const auto& [text, question] : needles) {
                if (text != t.text) continue;
                TraceTurn q;
                q.at = at += 60;
                q.prompt = question;
                q.relevant = {t.label};
                ask.turns.push_back(q);
            }
        }
    }
    trace.sessions.push_back(ask);
    return trace;
}

Outcome check_substituted()
{
    Checker ck;
    std::size_t prompts = 0;
    double worst = 1.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        ReplayConfig cfg;
        cfg.k = 20;
        const auto report = replay(planted_trace(seed), cfg);
        prompts += report.prompts;
        worst = std::min(worst, report.recall_at_k);
        ck.expect(report.recall_at_k == 1.0, "trace " + std::to_string(seed) + " recall " + fmt(report.recall_at_k, 3));
    }
    return ck.outcome("end-to-end benchmark judge/F1 scores and absolute latencies not reproducible at desk scale "
                      "(need a hosted judge model, the benchmark dataset and matching hardware); substituted by the "
                      "property suites and replay "
                      "recall@20 = " + fmt(worst, 3) + " (min) over 20 synthetic ground-truth traces, " +
                      std::to_string(prompts) + " prompts");
}

// ---- 10. durability ----

using Observed = std::map<CubeId, std::pair<std::string, Tier>>;

Observed observe(const Kernel& k)
{
    Observed o;
    for (const auto& s : k.vault().all()) o[s.cube.cube_id] = {canonical_dump(Json(s.cube)), s.tier};
    return o;
}

// One random op, applied identically to every kernel in `ks`.
void random_op(std::vector<Kernel*> ks, std::vector<ManualClock*> clocks, std::mt19937_64& rng, std::vector<CubeId>& ids)
{
    const auto dt = static_cast<std::int64_t>(rng() % 50);
    for (auto* c : clocks) c->advance_seconds(dt);
    const int op = ids.empty() ? 0 : static_cast<int>(rng() % 7);
    const CubeId target = ids.empty() ? "" : ids[rng() % ids.size()];
    const std::string text = testing::random_text(rng);
    const EventKind e = kAllEvents[rng() % std::size(kAllEvents)];
    const Tier tier = rng() % 2 ? Tier::Hot : Tier::Cold;
    const std::uint64_t back = 1 + rng() % 4;
    const bool stale = rng() % 5 == 0;
    CubeId created;
    for (auto* k : ks) {
        try {
            switch (op) {
            case 0:
                created = k->create(draft(text, "log"), "alice", ctx()).cube_id;
                break;
            case 1:
            case 2: {
                UpdateRequest u;
                u.cube_id = target;
                u.mode = op == 1 ? UpdateMode::Append : UpdateMode::Overwrite;
                u.content = text;
                u.expected_version = k->vault().find(target)->cube.version() - (stale ? 1 : 0);
                k->update(u, "alice", ctx());
                break;
            }
            case 3:
                k->transition(target, event_for(e, back), "alice", ctx());
                break;
            case 4:
                k->migrate_tier(target, tier, "alice", ctx());
                break;
            case 5:
                k->rollback(target, back, "alice", ctx());
                break;
            default:
                k->get(target, "alice", ctx());
                break;
            }
        } catch (const Error&) {
        }
    }
    if (!created.empty()) ids.push_back(created);
}

struct LogRun {
    std::string bytes;
    std::vector<std::uint64_t> boundaries;  // file size after each op
    std::vector<Observed> states;           // vault state after each op
};

KernelConfig durable_config(std::uint64_t seed)
{
    KernelConfig c = seeded(seed, "durable");
    c.recover = true;
    return c;
}

LogRun record_log(const fs::path& dir, std::uint64_t seed, int ops)
{
    fs::remove_all(dir);
    fs::create_directories(dir);
    LogRun run;
    std::mt19937_64 rng(seed);
    std::vector<CubeId> ids;
    {
        Rig r(durable_config(seed), {file_ns("log", dir)});
        run.boundaries.push_back(fs::file_size(dir / "log.mklog"));
        run.states.push_back(observe(r.kernel));
        for (int i = 0; i < ops; ++i) {
            random_op({&r.kernel}, {&r.clock}, rng, ids);
            run.boundaries.push_back(fs::file_size(dir / "log.mklog"));
            run.states.push_back(observe(r.kernel));
        }
    }
    std::ifstream in(dir / "log.mklog", std::ios::binary);
    run.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return run;
}

// Replays the first `cut` bytes; the result must validate and match the
// state at the last op boundary, or for a cut inside one op's records, hold
// only cubes from the state just before or just after that op.
bool replay_prefix(const fs::path& dir, const LogRun& run, std::size_t cut, std::uint64_t seed, std::string& why)
{
    {
        std::ofstream out(dir / "log.mklog", std::ios::binary | std::ios::trunc);
        out.write(run.bytes.data(), static_cast<std::streamsize>(cut));
    }
    try {
        Rig r(durable_config(seed), {file_ns("log", dir)});
        const Observed got = observe(r.kernel);
        for (const auto& s : r.kernel.vault().all()) {
            if (!validate(s.cube).empty()) {
                why = "invalid cube after cut " + std::to_string(cut);
                return false;
            }
        }
        const auto it = std::upper_bound(run.boundaries.begin(), run.boundaries.end(), cut);
        const std::size_t i = static_cast<std::size_t>(it - run.boundaries.begin());
        if (i == 0) return got.empty() || (why = "state from nothing", false);
        const Observed& before = run.states[i - 1];
        if (run.boundaries[i - 1] == cut) {
            if (got != before) why = "boundary cut " + std::to_string(cut) + " differs";
            return got == before;
        }
        const Observed& after = run.states[std::min(i, run.states.size() - 1)];
        for (const auto& [id, v] : got) {
            const auto b = before.find(id), a = after.find(id);
            const bool ok = (b != before.end() && b->second == v) || (a != after.end() && a->second == v);
            if (!ok) {
                why = "mid-op cut " + std::to_string(cut) + " produced an unseen cube state";
                return false;
            }
        }
        for (const auto& [id, v] : before) {
            if (!got.contains(id)) {
                why = "mid-op cut " + std::to_string(cut) + " lost a committed cube";
                return false;
            }
        }
        return true;
    } catch (const std::exception& e) {
        why = "cut " + std::to_string(cut) + ": " + e.what();
        return false;
    }
}

Outcome check_durability()
{
    Checker ck;
    const fs::path dir = fs::temp_directory_path() / ("memkernel-acceptance-" + std::to_string(::getpid()));

    // Every byte prefix of a short log, then op boundaries and random cuts of a long one.
    std::size_t cuts = 0;
    {
        const LogRun small = record_log(dir, 81, 12);
        for (std::size_t cut = 0; cut <= small.bytes.size(); ++cut, ++cuts) {
            std::string why;
            ck.expect(replay_prefix(dir, small, cut, 81, why), why);
        }
        const LogRun big = record_log(dir, 82, 300);
        for (const auto b : big.boundaries) {
            std::string why;
            ck.expect(replay_prefix(dir, big, b, 82, why), why);
            ++cuts;
        }
        std::mt19937_64 rng(83);
        for (int i = 0; i < 300; ++i, ++cuts) {
            std::string why;
            ck.expect(replay_prefix(dir, big, rng() % (big.bytes.size() + 1), 82, why), why);
        }
    }

    // Same op sequences against InMemory and FileLog, then a cold reopen.
    std::size_t sequences = 0, total_ops = 0;
    for (std::uint64_t seq = 0; seq < 1000; ++seq, ++sequences) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::mt19937_64 rng(9000 + seq);
        std::vector<CubeId> ids;
        Observed file_state;
        Rig mem(seeded(seq + 1), {mem_ns("log")});
        {
            Rig file(seeded(seq + 1), {file_ns("log", dir)});
            const int n = 1 + static_cast<int>(rng() % 12);
            total_ops += static_cast<std::size_t>(n);
            for (int i = 0; i < n; ++i) random_op({&mem.kernel, &file.kernel}, {&mem.clock, &file.clock}, rng, ids);
            file_state = observe(file.kernel);
            ck.expect(observe(mem.kernel) == file_state, "sequence " + std::to_string(seq) + " diverged");
        }
        Rig reopened(seeded(seq + 1), {file_ns("log", dir)});
        ck.expect(observe(reopened.kernel) == file_state, "sequence " + std::to_string(seq) + " reopen differs");
    }
    fs::remove_all(dir);
    return ck.outcome(std::to_string(cuts) + " log prefixes replayed to valid states; " + std::to_string(sequences) +
                      " random sequences (" + std::to_string(total_ops) + " ops) equal across InMemory, FileLog and reopen");
}

struct Criterion {
    std::string id;
    std::function<Outcome()> run;
};

}  // namespace
}  // namespace memkernel

int main(int argc, char** argv)
{
    using namespace memkernel;
    CLI::App app{"memkernel acceptance criteria"};
    std::vector<std::string> only, expect_fail;
    app.add_option("--only", only, "Run only these criteria");
    app.add_option("--expect-fail", expect_fail, "Criteria known to fail; exit 0 if exactly these fail");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria{
        {"lifecycle-fsm", check_fsm},
        {"retrieval-oracle", check_retrieval},
        {"version-time-machine", check_time_machine},
        {"governance-completeness", check_governance},
        {"scheduler-migration", check_scheduler},
        {"interchange-round-trip", check_interchange},
        {"kv-equivalence", check_kv},
        {"ttft-cost-model", check_ttft},
        {"benchmarks-substituted", check_substituted},
        {"durability", check_durability},
    };
    std::set<std::string> failed;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.id == "lifecycle-fsm" && secs >= 10.0) o = {false, o.detail + "; runtime " + fmt(secs) + " s >= 10 s"};
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << "  " << o.detail << "  [" << fmt(secs) << " s]"
                  << std::endl;
        if (!o.pass) failed.insert(c.id);
    }
    std::set<std::string> expected(expect_fail.begin(), expect_fail.end());
    if (!only.empty()) {
        std::erase_if(expected, [&](const std::string& id) { return std::find(only.begin(), only.end(), id) == only.end(); });
    }
    return failed == expected ? 0 : 1;
}
