// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/gateway/gateway.hpp"

#include "memkernel/core/digest.hpp"
#include "memkernel/harness/engine.hpp"
#include "memkernel/harness/replay.hpp"

#include <algorithm>

namespace memkernel {

namespace {

// Typed access to request args; failures name the field.
class Args {
public:
    explicit Args(const Json& j) : j_(j)
    {
        if (!j_.is_object()) throw Error(ErrorCode::BadArgs, "args: must be an object");
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    template <typename T>
    T req(const char* key) const
    {
        if (!has(key)) throw Error(ErrorCode::BadArgs, std::string("args.") + key + ": required");
        return get<T>(key);
    }

    template <typename T>
    T opt(const char* key, T fallback) const
    {
        return has(key) ? get<T>(key) : fallback;
    }

    template <typename T>
    std::optional<T> maybe(const char* key) const
    {
        if (!has(key)) return std::nullopt;
        return get<T>(key);
    }

    // Enum-like values parsed from strings by `parse`.
    template <typename F>
    auto word(const char* key, F&& parse) const
    {
        const auto s = req<std::string>(key);
        try {
            return parse(s);
        } catch (const Error& e) {
            throw Error(ErrorCode::BadArgs, std::string("args.") + key + ": " + e.detail());
        }
    }

private:
    template <typename T>
    T get(const char* key) const
    {
        try {
            return j_.at(key).get<T>();
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::BadArgs, std::string("args.") + key + ": " + e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::BadArgs || e.code() == ErrorCode::MalformedFilter) {
                throw Error(e.code(), std::string("args.") + key + ": " + e.detail());
            }
            throw Error(ErrorCode::BadArgs, std::string("args.") + key + ": " + e.detail());
        }
    }

    const Json& j_;
};

Json state_json(const LifecycleState& s) { return Json(s); }

Json transition_json(const TransitionResult& r)
{
    return Json{{"cube", r.cube}, {"from", state_json(r.from)}, {"to", state_json(r.to)}, {"version_appended", r.version_appended}};
}

Json items_json(const std::vector<PlanItem>& items)
{
    Json out = Json::array();
    for (const auto& i : items) out.push_back(Json{{"cube_id", i.cube_id}, {"token_count", i.token_count}, {"score", i.score}});
    return out;
}

Json plan_json(const InjectionPlan& p)
{
    return Json{{"plaintext_items", items_json(p.plaintext_items)},
                {"activation_items", items_json(p.activation_items)},
                {"parameter_modules", items_json(p.parameter_modules)},
                {"total_tokens", p.total_tokens},
                {"budget", p.budget}};
}

Json receipt_json(const PullReceipt& r)
{
    return Json{{"snapshot", r.snapshot},
                {"call_number", r.call_number},
                {"max_calls", r.max_calls ? Json(*r.max_calls) : Json(nullptr)}};
}

Json ids_json(const std::vector<CubeId>& ids) { return Json{{"ids", ids}}; }

Json hits_json(const std::vector<RankedHit>& hits) { return Json{{"hits", hits}}; }

StructuredFilter filter_arg(const Args& a, const char* key = "filter")
{
    auto f = a.opt<StructuredFilter>(key, StructuredFilter{});
    f.check();
    return f;
}

ReplayConfig replay_config(const Json& j)
{
    ReplayConfig c;
    if (j.is_null()) return c;
    const Args a(j);
    c.k = a.opt<std::size_t>("k", c.k);
    c.budget_tokens = a.opt<std::uint64_t>("budget_tokens", c.budget_tokens);
    c.migration = a.opt<bool>("migration", c.migration);
    c.rule.theta_promote = a.opt<double>("theta_promote", c.rule.theta_promote);
    c.rule.window_seconds = a.opt<double>("window_seconds", c.rule.window_seconds);
    c.capacity = a.maybe<std::size_t>("capacity");
    c.seed = a.opt<std::uint64_t>("seed", c.seed);
    if (a.has("cost_model")) {
        const auto m = a.req<std::string>("cost_model");
        const auto rows = rows_for(m);
        if (rows.empty()) throw Error(ErrorCode::BadArgs, "args.config.cost_model: unknown model '" + m + "'");
        c.cost = fit_cost_model(rows, m);
    }
    c.rule.check();
    return c;
}

// Replaces invalid UTF-8 so error text never breaks the reply encoder.
std::string valid_utf8(const std::string& s)
{
    return Json::parse(Json(s).dump(-1, ' ', false, Json::error_handler_t::replace)).get<std::string>();
}

std::string idem_slot(const WireRequest& r) { return r.actor + '\x1f' + r.op + '\x1f' + *r.idempotency_key; }

}  // namespace

Json to_json(const WireRequest& r)
{
    Json j{{"id", r.id}, {"actor", r.actor}, {"context", r.context}, {"op", r.op}, {"args", r.args}};
    if (r.idempotency_key) j["idempotency_key"] = *r.idempotency_key;
    if (r.now) j["now"] = *r.now;
    return j;
}

Json to_json(const WireResponse& r)
{
    Json j{{"id", r.id}, {"status", r.ok ? "Ok" : "Err"}, {"body", r.body}, {"audit_seq", r.audit_seq}};
    if (!r.ok) {
        j["code"] = r.code ? std::string(error_code_name(*r.code)) : std::string("INTERNAL");
        j["message"] = r.message;
    }
    return j;
}

WireRequest parse_request(const Json& j)
{
    if (!j.is_object()) throw Error(ErrorCode::BadArgs, "request: must be an object");
    WireRequest r;
    const auto str = [&](const char* key, bool required) -> std::string {
        if (!j.contains(key) || j.at(key).is_null()) {
            if (required) throw Error(ErrorCode::BadArgs, std::string(key) + ": required");
            return {};
        }
        if (!j.at(key).is_string()) throw Error(ErrorCode::BadArgs, std::string(key) + ": must be a string");
        return j.at(key).get<std::string>();
    };
    r.id = str("id", false);
    r.actor = str("actor", true);
    r.op = str("op", true);
    if (r.actor.empty()) throw Error(ErrorCode::BadArgs, "actor: must be non-empty");
    if (j.contains("context") && !j.at("context").is_null()) {
        const Json& c = j.at("context");
        if (!c.is_object()) throw Error(ErrorCode::BadArgs, "context: must be an object");
        try {
            r.context.session_id = c.value("session_id", std::string{});
            r.context.purpose = c.value("purpose", std::string{});
            r.context.platform = c.value("platform", std::string{});
            if (c.contains("time") && !c.at("time").is_null()) r.context.time = c.at("time").get<Timestamp>();
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::BadArgs, std::string("context: ") + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::BadArgs, "context.time: " + e.detail());
        }
    }
    if (j.contains("args") && !j.at("args").is_null()) r.args = j.at("args");
    if (!r.args.is_object()) throw Error(ErrorCode::BadArgs, "args: must be an object");
    if (j.contains("idempotency_key") && !j.at("idempotency_key").is_null()) {
        r.idempotency_key = str("idempotency_key", true);
        if (r.idempotency_key->empty()) throw Error(ErrorCode::BadArgs, "idempotency_key: must be non-empty");
    }
    if (j.contains("now") && !j.at("now").is_null()) {
        try {
            r.now = j.at("now").get<Timestamp>();
        } catch (const std::exception& e) {
            throw Error(ErrorCode::BadArgs, std::string("now: ") + e.what());
        }
    }
    return r;
}

WireResponse parse_response(const Json& j)
{
    WireResponse r;
    try {
        r.id = j.at("id").get<std::string>();
        r.ok = j.at("status").get<std::string>() == "Ok";
        r.body = j.value("body", Json(nullptr));
        r.audit_seq = j.value("audit_seq", std::uint64_t{0});
        if (!r.ok) {
            r.code = error_code_from_name(j.at("code").get<std::string>());
            r.message = j.value("message", std::string{});
        }
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::DecodeError, std::string("response: ") + e.what());
    }
    return r;
}

Gateway::Gateway(DeploymentConfig config) : config_(std::move(config))
{
    config_.check();
    if (config_.clock_mode == ClockMode::Injected) {
        manual_ = std::make_unique<ManualClock>(config_.clock_start);
    } else {
        system_ = std::make_unique<SystemClock>();
    }
    embedder_ = std::make_unique<HashedBagOfWords>(config_.embedder_dim);
    const Clock& clock = manual_ ? static_cast<const Clock&>(*manual_) : *system_;
    kernel_ = std::make_unique<Kernel>(config_.kernel_config(), clock, *embedder_);
    for (const auto& n : config_.namespaces) kernel_->open_namespace(n);
    register_ops();
}

std::vector<std::string> Gateway::ops() const
{
    std::vector<std::string> out;
    for (const auto& [name, op] : ops_) out.push_back(name);
    return out;
}

WireResponse Gateway::fail(const WireRequest& request, const Error& e, bool audit)
{
    WireResponse r;
    r.id = request.id;
    r.ok = false;
    r.code = e.code();
    r.message = e.detail();
    r.body = nullptr;
    if (audit) {
        const auto it = ops_.find(request.op);
        const AuditOp op = it != ops_.end() ? it->second.audit_op : AuditOp::Read;
        r.audit_seq = kernel_->audit_external(request.actor, request.context, op, "wire " + request.op, e.code(), e.detail());
    }
    return r;
}

WireResponse Gateway::handle(const WireRequest& request)
{
    if (!request.idempotency_key) return dispatch(request);
    const auto slot = idem_slot(request);
    std::promise<WireResponse> mine;
    std::shared_future<WireResponse> shared;
    bool owner = false;
    {
        std::lock_guard lk(idem_mu_);
        const auto it = idem_.find(slot);
        if (it != idem_.end()) {
            shared = it->second;
        } else {
            shared = mine.get_future().share();
            idem_.emplace(slot, shared);
            idem_order_.push_back(slot);
            while (idem_order_.size() > kIdempotencyCapacity) {
                idem_.erase(idem_order_.front());
                idem_order_.pop_front();
            }
            owner = true;
        }
    }
    if (owner) mine.set_value(dispatch(request));
    WireResponse r = shared.get();
    r.id = request.id;
    return r;
}

WireResponse Gateway::dispatch(const WireRequest& request)
{
    Kernel::clear_last_audit_seq();
    const auto it = ops_.find(request.op);
    if (it == ops_.end()) return fail(request, Error(ErrorCode::UnknownOp, "unknown op '" + request.op + "'"), true);
    try {
        if (request.context.session_id.empty()) throw Error(ErrorCode::BadArgs, "context.session_id: must be non-empty");
        if (request.now) {
            if (!manual_) throw Error(ErrorCode::BadArgs, "now: requires the injected clock mode");
            manual_->set(*request.now);
        }
        WireResponse r;
        r.id = request.id;
        r.body = it->second.run(request.args, request.actor, request.context);
        r.audit_seq = it->second.external
                          ? kernel_->audit_external(request.actor, request.context, it->second.audit_op, request.op, {})
                          : Kernel::last_audit_seq();
        return r;
    } catch (const Error& e) {
        // Kernel ops have already recorded the failure themselves.
        const std::uint64_t seq = Kernel::last_audit_seq();
        WireResponse r = fail(request, e, seq == 0);
        if (seq != 0) r.audit_seq = seq;
        return r;
    } catch (const std::exception& e) {
        const std::uint64_t seq = Kernel::last_audit_seq();
        WireResponse r = fail(request, Error(ErrorCode::Internal, e.what()), seq == 0);
        if (seq != 0) r.audit_seq = seq;
        return r;
    }
}

std::string Gateway::handle_text(std::string_view bytes)
{
    WireRequest req;
    std::optional<Identity> actor;
    try {
        Json j;
        try {
            j = Json::parse(bytes);
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::DecodeError, std::string("request is not JSON: ") + e.what());
        }
        if (j.is_object()) {
            if (j.contains("id") && j.at("id").is_string()) req.id = j.at("id").get<std::string>();
            if (j.contains("op") && j.at("op").is_string()) req.op = j.at("op").get<std::string>();
            if (j.contains("actor") && j.at("actor").is_string() && !j.at("actor").get<std::string>().empty()) {
                actor = j.at("actor").get<std::string>();
            }
        }
        req = parse_request(j);
    } catch (const std::exception& e) {
        const auto* err = dynamic_cast<const Error*>(&e);
        WireResponse r;
        r.id = req.id;
        r.ok = false;
        r.code = err ? err->code() : ErrorCode::DecodeError;
        r.message = valid_utf8(err ? err->detail() : std::string(e.what()));
        r.body = nullptr;
        if (actor) {
            try {
                r.audit_seq = kernel_->audit_external(*actor, CallContext{}, AuditOp::Read, "wire " + valid_utf8(req.op),
                                                      r.code, r.message);
            } catch (const std::exception&) {
                r.audit_seq = 0;
            }
        }
        return canonical_dump(to_json(r));
    }
    try {
        WireResponse r = handle(req);
        r.message = valid_utf8(r.message);
        return canonical_dump(to_json(r));
    } catch (const std::exception& e) {
        WireResponse r;
        r.id = req.id;
        r.ok = false;
        r.code = ErrorCode::Internal;
        r.message = valid_utf8(e.what());
        r.body = nullptr;
        return canonical_dump(to_json(r));
    }
}

void Gateway::register_ops()
{
    Kernel& k = *kernel_;
    auto add = [&](const char* name, Handler h) { ops_[name] = Op{std::move(h), AuditOp::Read, false}; };
    auto external = [&](const char* name, AuditOp op, Handler h) { ops_[name] = Op{std::move(h), op, true}; };

    add("create", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        CubeDraft d;
        if (a.has("payload")) {
            d.payload = a.req<MemoryPayload>("payload");
        } else {
            d.payload = PlaintextPayload{a.req<std::string>("text"), {}};
        }
        d.namespace_name = a.req<std::string>("namespace");
        d.semantic_type = a.opt<std::string>("semantic_type", "fact");
        d.tags = a.opt<std::set<std::string>>("tags", {});
        if (a.has("layer")) d.layer = a.word("layer", parse_layer);
        if (a.has("origin")) d.origin = a.word("origin", parse_origin);
        if (a.has("acl")) d.acl = a.req<AccessPolicy>("acl");
        if (a.has("lifespan")) d.lifespan = a.req<LifespanPolicy>("lifespan");
        d.priority = a.opt<int>("priority", d.priority);
        d.sensitivity = a.opt<std::set<std::string>>("sensitivity", {});
        return Json(k.create(std::move(d), actor, ctx));
    });
    add("get", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.get(Args(j).req<std::string>("id"), actor, ctx));
    });
    add("list", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return ids_json(k.list(a.req<std::string>("namespace"), filter_arg(a), actor, ctx));
    });
    add("query_structured", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return ids_json(k.query_structured(filter_arg(Args(j)), actor, ctx));
    });
    add("query_semantic", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return hits_json(k.query_semantic(a.req<std::string>("text"), a.opt<std::size_t>("k", 20), actor, ctx));
    });
    add("query_hybrid", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return hits_json(
            k.query_hybrid(filter_arg(a), a.req<std::string>("text"), a.opt<std::size_t>("k", 20), actor, ctx));
    });
    add("resolve_path", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.resolve_path(Args(j).req<std::string>("task"), actor, ctx));
    });
    add("parse", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return Json(k.parse(a.req<std::string>("prompt"), a.opt<std::vector<MemoryCall>>("dialogue", {}), actor, ctx));
    });
    add("update", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        UpdateRequest r;
        r.cube_id = a.req<std::string>("id");
        r.mode = a.word("mode", parse_update_mode);
        r.content = a.opt<std::string>("content", {});
        r.sources = a.opt<std::vector<std::string>>("sources", {});
        r.expected_version = a.req<std::uint64_t>("expected_version");
        r.label = a.opt<std::string>("label", {});
        return Json{{"version", k.update(r, actor, ctx)}};
    });
    add("provenance", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        ProvenanceInput p{a.req<std::string>("trigger"), a.opt<std::string>("context", {}),
                          a.opt<std::string>("model_id", {}), a.opt<std::vector<std::string>>("external_links", {})};
        return Json{{"provenance_id", k.provenance(a.req<std::string>("id"), p, actor, ctx)}};
    });
    add("transition", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        LifecycleEvent ev = LifecycleEvent::of(a.word("event", parse_event_kind));
        ev.merge_target = a.opt<std::string>("merge_target", {});
        ev.restore_version = a.opt<std::uint64_t>("restore_version", 0);
        return transition_json(k.transition(a.req<std::string>("id"), ev, actor, ctx));
    });
    add("rollback", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return Json(k.rollback(a.req<std::string>("id"), a.req<std::uint64_t>("version"), actor, ctx));
    });
    add("tick", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        Args{j};
        Json changes = Json::array();
        for (const auto& c : k.tick(actor, ctx)) {
            changes.push_back(Json{{"cube_id", c.cube_id}, {"from", state_json(c.from)}, {"to", state_json(c.to)}});
        }
        return Json{{"changes", changes}, {"now", k.now()}};
    });
    add("watermark", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return Json(k.watermark(a.req<std::string>("id"), a.req<std::string>("provider_id"), a.req<std::string>("salt"), actor, ctx));
    });
    add("migrate_tier", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        k.migrate_tier(a.req<std::string>("id"), a.word("tier", parse_tier), actor, ctx);
        return Json::object();
    });
    add("plan", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return plan_json(k.plan(a.req<std::string>("text"), a.opt<std::uint64_t>("budget", 2048),
                                a.opt<std::size_t>("k", 20), actor, ctx));
    });
    add("promote", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.promote(Args(j).req<std::string>("id"), actor, ctx));
    });
    add("demote", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.demote(Args(j).req<std::string>("id"), actor, ctx));
    });
    add("distill", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.distill(Args(j).req<std::vector<std::string>>("ids"), actor, ctx));
    });
    add("offload", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.offload(Args(j).req<std::string>("id"), actor, ctx));
    });
    add("evict", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        const auto r = k.evict(a.req<std::string>("namespace"), a.maybe<std::size_t>("capacity"), actor, ctx);
        return Json{{"evicted", r.evicted}, {"frozen_blocked", r.frozen_blocked}};
    });
    add("cache_evaluate", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        Args{j};
        const auto r = k.cache_evaluate(actor, ctx);
        return Json{{"promoted", r.promoted}, {"invalidated", r.invalidated}};
    });
    add("audit_query", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        AuditFilter f;
        f.from = a.maybe<Timestamp>("from");
        f.to = a.maybe<Timestamp>("to");
        f.actor = a.maybe<std::string>("actor");
        f.cube_id = a.maybe<std::string>("cube_id");
        if (a.has("op")) f.op = a.word("op", parse_audit_op);
        if (a.has("memory_kind")) f.memory_kind = a.word("memory_kind", parse_memory_kind);
        return Json{{"records", k.audit_query(f, actor, ctx)}};
    });
    add("pipeline_run", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json(k.pipeline_run(Args(j).req<PipelineSpec>("spec"), actor, ctx));
    });
    add("dump", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        const auto bytes = k.dump(filter_arg(a), DumpPolicy{a.opt<bool>("include_audit", false)}, actor, ctx);
        const std::span<const std::uint8_t> raw(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
        return Json{{"archive", base64_encode(raw)}, {"bytes", bytes.size()}, {"sha256", sha256(std::string_view(bytes)).hex()}};
    });
    add("load", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        std::vector<std::uint8_t> raw;
        try {
            raw = base64_decode(a.req<std::string>("archive"));
        } catch (const Error& e) {
            throw Error(ErrorCode::BadArgs, "args.archive: " + e.detail());
        }
        const std::string bytes(raw.begin(), raw.end());
        return ids_json(k.load(bytes, a.req<std::string>("namespace"), actor, ctx));
    });
    add("publish", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        const auto r = k.publish(a.req<std::string>("id"), a.opt<Visibility>("visibility", {}),
                                 a.opt<License>("license", {}), actor, ctx);
        return Json{{"listing", r.listing}, {"deliveries", r.deliveries}};
    });
    add("pull", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        return receipt_json(k.pull(a.req<std::string>("listing_id"), a.maybe<std::string>("fee_token"),
                                   a.maybe<std::string>("install_namespace"), actor, ctx));
    });
    add("subscribe", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        const Args a(j);
        Subscription s = a.req<Subscription>("subscription");
        return Json{{"subscription_id", k.subscribe(std::move(s), actor, ctx)}};
    });
    add("notify", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json{{"deliveries", k.notify(Args(j).req<std::string>("listing_id"), actor, ctx)}};
    });
    add("inbox", [&k](const Json& j, const Identity& actor, const CallContext& ctx) {
        return Json{{"listings", k.inbox(Args(j).req<std::string>("subscription_id"), actor, ctx)}};
    });

    external("state_digest", AuditOp::Read, [&k](const Json& j, const Identity&, const CallContext&) {
        Args{j};
        return Json{{"digest", k.state_digest().hex()}};
    });
    external("ops", AuditOp::Read, [this](const Json& j, const Identity&, const CallContext&) {
        Args{j};
        return Json{{"ops", ops()}};
    });
    external("simulate", AuditOp::Read, [](const Json& j, const Identity&, const CallContext&) {
        const Args a(j);
        const auto trace = parse_trace(a.req<Json>("trace"));
        return to_json(replay(trace, replay_config(a.opt<Json>("config", Json(nullptr)))));
    });
    external("dual_path", AuditOp::Read, [](const Json& j, const Identity&, const CallContext&) {
        const Args a(j);
        const auto r = run_dual_path(a.opt<std::string>("memory", {}), a.req<std::string>("query"), mock_engine(),
                                     a.opt<std::size_t>("max_tokens", kDefaultGenerateTokens));
        return Json{{"prompt_output", r.prompt_output},
                    {"kv_output", r.kv_output},
                    {"equal", r.equal()},
                    {"memory_tokens", r.memory_tokens},
                    {"query_tokens", r.query_tokens}};
    });
    external("clock_now", AuditOp::Read, [&k](const Json& j, const Identity&, const CallContext&) {
        Args{j};
        return Json{{"now", k.now()}};
    });
    external("clock_set", AuditOp::Transition, [this](const Json& j, const Identity& actor, const CallContext&) {
        const Args a(j);
        if (!manual_) throw Error(ErrorCode::PreconditionNotMet, "clock_set requires the injected clock mode");
        if (!config_.admins.empty() && !config_.admins.contains(actor)) {
            throw Error(ErrorCode::AccessDenied, "NOT_ADMIN");
        }
        if (a.has("now")) manual_->set(a.req<Timestamp>("now"));
        const auto adv = a.opt<double>("advance_seconds", 0);
        if (adv < 0) throw Error(ErrorCode::BadArgs, "args.advance_seconds: must be >= 0");
        manual_->set(manual_->now().plus_seconds(adv));
        return Json{{"now", manual_->now()}};
    });
}

}  // namespace memkernel
