// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/harness/replay.hpp"

#include "memkernel/core/errors.hpp"
#include "memkernel/core/fingerprint.hpp"
#include "memkernel/interface/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace memkernel {

namespace {

constexpr const char* kReplayNamespace = "replay";

[[noreturn]] void invalid(const std::string& where, const std::string& what)
{
    throw Error(ErrorCode::TraceInvalid, where + ": " + what);
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where)
{
    if (!j.contains(key)) invalid(where, std::string("missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        invalid(where + "." + key, "wrong type");
    }
}

}  // namespace

WorkloadTrace parse_trace(const Json& j)
{
    if (!j.is_object()) invalid("trace", "must be an object");
    WorkloadTrace t;
    if (j.contains("epoch")) {
        try {
            t.epoch = parse_iso8601(field<std::string>(j, "epoch", "trace"));
        } catch (const Error& e) {
            invalid("trace.epoch", e.what());
        }
    }
    const auto sessions = j.value("sessions", Json::array());
    if (!sessions.is_array()) invalid("trace.sessions", "must be an array");
    std::set<std::string> ids;
    std::set<std::string> labels;
    for (std::size_t s = 0; s < sessions.size(); ++s) {
        const std::string where = "sessions[" + std::to_string(s) + "]";
        const Json& js = sessions[s];
        if (!js.is_object()) invalid(where, "must be an object");
        TraceSession sess;
        sess.id = field<std::string>(js, "id", where);
        if (sess.id.empty() || !ids.insert(sess.id).second) invalid(where + ".id", "empty or duplicate");
        if (js.contains("actor")) sess.actor = field<std::string>(js, "actor", where);
        if (sess.actor.empty()) invalid(where + ".actor", "empty");
        const auto turns = js.value("turns", Json::array());
        if (!turns.is_array()) invalid(where + ".turns", "must be an array");
        double last = -INFINITY;
        for (std::size_t i = 0; i < turns.size(); ++i) {
            const std::string tw = where + ".turns[" + std::to_string(i) + "]";
            const Json& jt = turns[i];
            if (!jt.is_object()) invalid(tw, "must be an object");
            TraceTurn turn;
            turn.at = field<double>(jt, "at", tw);
            if (!std::isfinite(turn.at) || turn.at < 0) invalid(tw + ".at", "must be a finite offset >= 0");
            if (turn.at < last) invalid(tw + ".at", "clock offsets must be non-decreasing");
            last = turn.at;
            const bool rem = jt.contains("remember");
            const bool ask = jt.contains("prompt");
            if (rem == ask) invalid(tw, "needs exactly one of 'remember' or 'prompt'");
            if (rem) {
                const Json& r = jt.at("remember");
                turn.label = field<std::string>(r, "label", tw + ".remember");
                turn.text = field<std::string>(r, "text", tw + ".remember");
                if (r.contains("tags")) turn.tags = field<std::set<std::string>>(r, "tags", tw + ".remember");
                if (turn.label.empty() || !labels.insert(turn.label).second) {
                    invalid(tw + ".remember.label", "empty or duplicate");
                }
                if (turn.text.empty()) invalid(tw + ".remember.text", "empty");
            } else {
                turn.prompt = field<std::string>(jt, "prompt", tw);
                if (turn.prompt.empty()) invalid(tw + ".prompt", "empty");
                if (jt.contains("relevant")) turn.relevant = field<std::vector<std::string>>(jt, "relevant", tw);
            }
            sess.turns.push_back(std::move(turn));
        }
        t.sessions.push_back(std::move(sess));
    }
    // Ground truth may only name cubes remembered somewhere in the trace.
    for (std::size_t s = 0; s < t.sessions.size(); ++s) {
        for (std::size_t i = 0; i < t.sessions[s].turns.size(); ++i) {
            for (const auto& l : t.sessions[s].turns[i].relevant) {
                if (!labels.contains(l)) {
                    invalid("sessions[" + std::to_string(s) + "].turns[" + std::to_string(i) + "].relevant",
                            "unknown label '" + l + "'");
                }
            }
        }
    }
    return t;
}

Json trace_to_json(const WorkloadTrace& t)
{
    Json sessions = Json::array();
    for (const auto& s : t.sessions) {
        Json turns = Json::array();
        for (const auto& turn : s.turns) {
            if (turn.is_prompt()) {
                turns.push_back(Json{{"at", turn.at}, {"prompt", turn.prompt}, {"relevant", turn.relevant}});
            } else {
                turns.push_back(
                    Json{{"at", turn.at}, {"remember", Json{{"label", turn.label}, {"text", turn.text}, {"tags", turn.tags}}}});
            }
        }
        sessions.push_back(Json{{"id", s.id}, {"actor", s.actor}, {"turns", std::move(turns)}});
    }
    return Json{{"epoch", format_iso8601(t.epoch)}, {"sessions", std::move(sessions)}};
}

Json to_json(const ReplayReport& r)
{
    Json turns = Json::array();
    for (const auto& t : r.turns) {
        turns.push_back(Json{{"session", t.session},
                             {"turn", t.turn},
                             {"kind", t.prompt ? "prompt" : "remember"},
                             {"recall", t.recall},
                             {"retrieved", t.retrieved},
                             {"plaintext_items", t.plaintext_items},
                             {"activation_items", t.activation_items},
                             {"prefill_tokens", t.prefill_tokens},
                             {"latency_s", t.latency_s},
                             {"promoted", t.promoted},
                             {"evicted", t.evicted}});
    }
    return Json{{"turns", std::move(turns)},
                {"summary",
                 Json{{"turns", r.turns.size()},
                      {"prompts", r.prompts},
                      {"k", r.k},
                      {"recall_at_k", r.recall_at_k},
                      {"cache_hit_rate", r.cache_hit_rate},
                      {"promotions", r.promotions},
                      {"evictions", r.evictions},
                      {"mean_latency_s", r.mean_latency_s},
                      {"latency_scope", "kernel-side simulated"}}}};
}

std::string report_text(const ReplayReport& r) { return canonical_dump(to_json(r)); }

ReplayReport replay(const WorkloadTrace& trace, const ReplayConfig& config)
{
    if (config.k == 0) throw Error(ErrorCode::BadArgs, "k must be positive");
    const CostModel cost = config.cost ? *config.cost : fit_cost_model(rows_for("Qwen3-8B"), "Qwen3-8B");

    ManualClock clock(trace.epoch);
    KernelConfig kc;
    kc.id_seed = config.seed;
    kc.weights = config.weights;
    kc.rule = config.rule;
    kc.deployment_id = "replay";
    Kernel kernel(kc, clock);
    NamespaceDescriptor ns;
    ns.name = kReplayNamespace;
    ns.kind = NamespaceKind::ContextPool;
    ns.capacity_cubes = config.capacity;
    kernel.open_namespace(ns);

    // (at, session, turn) order across sessions.
    std::vector<std::tuple<double, std::size_t, std::size_t>> order;
    for (std::size_t s = 0; s < trace.sessions.size(); ++s) {
        for (std::size_t i = 0; i < trace.sessions[s].turns.size(); ++i) {
            order.emplace_back(trace.sessions[s].turns[i].at, s, i);
        }
    }
    std::sort(order.begin(), order.end());

    std::map<std::string, CubeId> by_label;
    std::map<CubeId, std::string> label_of;
    std::map<std::size_t, std::vector<MemoryCall>> dialogue;

    ReplayReport rep;
    rep.k = config.k;
    double recall_sum = 0;
    std::size_t recall_n = 0;
    std::size_t injected = 0;
    std::size_t activation = 0;
    double latency_sum = 0;

    for (const auto& [at, s, i] : order) {
        const auto& sess = trace.sessions[s];
        const auto& turn = sess.turns[i];
        clock.set(trace.epoch.plus_seconds(at));
        const CallContext ctx{sess.id, "replay", "harness", clock.now()};
        TurnMetrics m;
        m.session = sess.id;
        m.turn = i;
        m.prompt = turn.is_prompt();

        if (!turn.is_prompt()) {
            CubeDraft d;
            d.payload = PlaintextPayload{turn.text, {}};
            d.namespace_name = kReplayNamespace;
            d.semantic_type = "fact";
            d.tags = turn.tags;
            d.acl = AccessPolicy::private_to(sess.actor);
            d.acl.readers_wildcard = true;
            const auto cube = kernel.create(std::move(d), sess.actor, ctx);
            by_label[turn.label] = cube.cube_id;
            label_of[cube.cube_id] = turn.label;
        } else {
            ++rep.prompts;
            auto& dlg = dialogue[s];
            dlg.push_back(kernel.parse(turn.prompt, dlg, sess.actor, ctx));

            // Retrieval quality: top-k semantic hits, twins counted as their source.
            const auto hits = kernel.query_semantic(turn.prompt, config.k, sess.actor, ctx);
            std::set<CubeId> got;
            for (const auto& h : hits) {
                const auto c = kernel.vault().find(h.cube_id);
                if (!c) continue;
                const auto* a = c->cube.activation();
                got.insert(a != nullptr ? a->source_cube : h.cube_id);
            }
            m.retrieved = got.size();
            if (!turn.relevant.empty()) {
                std::size_t found = 0;
                for (const auto& l : turn.relevant) {
                    const auto it = by_label.find(l);
                    found += it != by_label.end() && got.contains(it->second);
                }
                m.recall = static_cast<double>(found) / static_cast<double>(turn.relevant.size());
                recall_sum += m.recall;
                ++recall_n;
            }

            // Injection plan, then read what was injected.
            const auto plan = kernel.plan(turn.prompt, config.budget_tokens, config.k, sess.actor, ctx);
            m.plaintext_items = plan.plaintext_items.size();
            m.activation_items = plan.activation_items.size();
            std::uint64_t prefill = token_count(turn.prompt);
            for (const auto& it : plan.plaintext_items) prefill += it.token_count;
            m.prefill_tokens = prefill;
            m.latency_s = cost.c0 + cost.c1 * static_cast<double>(prefill) + (m.activation_items > 0 ? cost.c2 : 0.0);
            injected += plan.plaintext_items.size() + plan.activation_items.size();
            activation += plan.activation_items.size();
            latency_sum += m.latency_s;

            for (const auto& it : plan.activation_items) kernel.get(it.cube_id, sess.actor, ctx);
            for (const auto& it : plan.plaintext_items) {
                kernel.get(it.cube_id, sess.actor, ctx);
                if (!config.migration || kernel.twin_of(it.cube_id)) continue;
                const auto acc = kernel.accesses(it.cube_id);
                if (static_cast<double>(accesses_in_window(acc, clock.now(), config.rule.window_seconds)) <
                    config.rule.theta_promote) {
                    continue;
                }
                const auto owner = kernel.vault().find(it.cube_id)->cube.header.acl.owner;
                kernel.promote(it.cube_id, owner, ctx);
                m.promoted.push_back(label_of[it.cube_id]);
                ++rep.promotions;
            }
        }

        kernel.tick("system", ctx);
        if (config.capacity) {
            m.evicted = kernel.evict(kReplayNamespace, config.capacity, "system", ctx).evicted.size();
            rep.evictions += m.evicted;
        }
        rep.turns.push_back(std::move(m));
    }

    rep.recall_at_k = recall_n ? recall_sum / static_cast<double>(recall_n) : 0.0;
    rep.cache_hit_rate = injected ? static_cast<double>(activation) / static_cast<double>(injected) : 0.0;
    rep.mean_latency_s = rep.prompts ? latency_sum / static_cast<double>(rep.prompts) : 0.0;
    return rep;
}

}  // namespace memkernel
