// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

// memctl: command-line client. Every verb becomes one wire envelope, sent
// to an in-process gateway (--config) or to a running server (--addr).
//
// Exit status: 0 success, 1 the kernel returned an error, 2 usage error.

#include "memkernel/core/digest.hpp"
#include "memkernel/gateway/gateway.hpp"
#include "memkernel/gateway/http.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace memkernel;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Json json_arg(const std::string& flag, const std::string& text)
{
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw UsageError(flag + ": not valid JSON");
    return j;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string scalar(const Json& v)
{
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "-";
    return v.dump();
}

// Human-readable rendering. Arrays of objects become tab-separated rows of
// their scalar fields; everything else prints as key: value.
void print_table(std::ostream& out, const Json& body)
{
    if (!body.is_object()) {
        out << scalar(body) << '\n';
        return;
    }
    for (const auto& [key, v] : body.items()) {
        if (v.is_array() && !v.empty() && v.front().is_object()) {
            std::vector<std::string> cols;
            for (const auto& [k, x] : v.front().items()) {
                if (!x.is_structured()) cols.push_back(k);
            }
            out << key << ":\n ";
            for (const auto& c : cols) out << ' ' << c;
            out << '\n';
            for (const auto& row : v) {
                out << ' ';
                for (const auto& c : cols) out << ' ' << (row.contains(c) ? scalar(row.at(c)) : "-");
                out << '\n';
            }
        } else if (v.is_array()) {
            out << key << ":";
            for (const auto& x : v) out << ' ' << scalar(x);
            out << '\n';
        } else if (v.is_object()) {
            out << key << ": " << canonical_dump(v) << '\n';
        } else {
            out << key << ": " << scalar(v) << '\n';
        }
    }
}

class Transport {
public:
    virtual ~Transport() = default;
    virtual WireResponse call(const WireRequest& r) = 0;
};

class InProcess : public Transport {
public:
    explicit InProcess(DeploymentConfig c) : gateway_(std::move(c)) {}
    WireResponse call(const WireRequest& r) override { return gateway_.handle(r); }
    Gateway& gateway() { return gateway_; }

private:
    Gateway gateway_;
};

class Remote : public Transport {
public:
    explicit Remote(const ListenAddress& a) : client_(a) {}
    WireResponse call(const WireRequest& r) override { return client_.call(r); }

private:
    HttpClient client_;
};

DeploymentConfig resolve_config(const std::string& path)
{
    if (!path.empty()) return load_deployment_config(path);
    if (const char* env = std::getenv("MEMKERNEL_CONFIG"); env != nullptr && *env != '\0') {
        return load_deployment_config(env);
    }
    return default_deployment_config();
}

int serve(DeploymentConfig config, const std::string& listen)
{
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ListenAddress address = listen.empty() ? config.listen_address() : parse_listen_address(listen);
    Gateway gateway(std::move(config));
    HttpServer server(gateway);
    address.port = server.bind(address);
    server.start();
    std::cout << "listening on " << address.host << ':' << address.port << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"memctl: memkernel command-line client"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, addr, actor = "user", session = "cli", format = "table", now, idem;
    app.add_option("--config", config_path, "Deployment config for the in-process gateway");
    app.add_option("--addr", addr, "host:port of a running server (or MEMKERNEL_ADDR)");
    app.add_option("--actor", actor, "Calling identity");
    app.add_option("--session", session, "Session id");
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"table", "canonical"}));
    app.add_option("--now", now, "Injected clock time for this call (ISO 8601)");
    app.add_option("--idempotency-key", idem, "Idempotency key");

    std::string op;
    Json args = Json::object();
    std::string out_file;

    // Fields shared across verbs.
    std::string id, ns, text, mode, content, event, merge_target, filter, listing, fee_token, install_ns,
        payload_file, acl, sub, vis = "Public", expires, listen, trace_file, replay_cfg, args_text, audit_actor,
        audit_cube, audit_op, from, to;
    std::vector<std::string> tags, allow;
    std::uint64_t expected_version = 0, restore_version = 0, max_calls = 0;
    std::size_t k = 20, capacity = 0;
    int priority = 50;
    bool include_audit = false;

    auto* create = app.add_subcommand("create", "Create a plaintext memory");
    create->add_option("--namespace", ns)->required();
    create->add_option("--text", text)->required();
    create->add_option("--tag", tags);
    create->add_option("--priority", priority);
    create->add_option("--acl", acl, "AccessPolicy JSON");

    auto* get = app.add_subcommand("get", "Read a memory");
    get->add_option("id", id)->required();

    auto* query = app.add_subcommand("query", "Structured, semantic, or hybrid query");
    query->add_option("--text", text, "Semantic query text");
    query->add_option("--filter", filter, "StructuredFilter JSON");
    query->add_option("-k", k);

    auto* update = app.add_subcommand("update", "Append, overwrite, or merge");
    update->add_option("id", id)->required();
    update->add_option("--mode", mode)->required()->check(CLI::IsMember({"Append", "Overwrite", "Merge"}));
    update->add_option("--content", content);
    update->add_option("--source", tags, "Merge source id (repeatable)");
    update->add_option("--expected-version", expected_version)->required();

    auto* transition = app.add_subcommand("transition", "Apply a lifecycle event");
    transition->add_option("id", id)->required();
    transition->add_option("event", event)->required();
    transition->add_option("--merge-target", merge_target);
    transition->add_option("--restore-version", restore_version);

    auto* promote = app.add_subcommand("promote", "Promote plaintext to an activation twin");
    promote->add_option("id", id)->required();

    auto* evict = app.add_subcommand("evict", "Evict down to capacity");
    evict->add_option("namespace", ns)->required();
    evict->add_option("--capacity", capacity);

    auto* dump = app.add_subcommand("dump", "Export an archive");
    dump->add_option("--filter", filter);
    dump->add_flag("--include-audit", include_audit);
    dump->add_option("--out", out_file, "Write the archive bytes here");

    auto* import = app.add_subcommand("import", "Load an archive into a namespace");
    import->add_option("file", payload_file)->required();
    import->add_option("--namespace", ns)->required();

    auto* publish = app.add_subcommand("publish", "List a memory on the exchange");
    publish->add_option("id", id)->required();
    publish->add_option("--visibility", vis)->check(CLI::IsMember({"Public", "Allowlist"}));
    publish->add_option("--allow", allow);
    publish->add_option("--max-calls", max_calls);
    publish->add_option("--expires", expires);
    publish->add_option("--fee-token", fee_token);

    auto* pull = app.add_subcommand("pull", "Pull a listing");
    pull->add_option("listing", listing)->required();
    pull->add_option("--fee-token", fee_token);
    pull->add_option("--install-namespace", install_ns);

    auto* subscribe = app.add_subcommand("subscribe", "Register a subscription");
    subscribe->add_option("subscription", sub, "Subscription JSON")->required();

    auto* audit = app.add_subcommand("audit", "Query the audit log");
    audit->add_option("--actor", audit_actor);
    audit->add_option("--cube", audit_cube);
    audit->add_option("--op", audit_op);
    audit->add_option("--from", from);
    audit->add_option("--to", to);

    auto* tick = app.add_subcommand("tick", "Run lifespan expiry");

    auto* srv = app.add_subcommand("serve", "Run the HTTP gateway");
    srv->add_option("--listen", listen, "host:port (default from config)");

    auto* simulate = app.add_subcommand("simulate", "Replay a workload trace");
    simulate->add_option("trace", trace_file)->required();
    simulate->add_option("--replay-config", replay_cfg, "Replay config JSON");

    auto* call = app.add_subcommand("call", "Send any op with raw JSON args");
    call->add_option("op", op)->required();
    call->add_option("--args", args_text);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (srv->parsed()) return serve(resolve_config(config_path), listen);

        if (create->parsed()) {
            op = "create";
            args = Json{{"namespace", ns}, {"text", text}, {"tags", tags}, {"priority", priority}};
            if (!acl.empty()) args["acl"] = json_arg("--acl", acl);
        } else if (get->parsed()) {
            op = "get";
            args = Json{{"id", id}};
        } else if (query->parsed()) {
            if (text.empty() && filter.empty()) throw UsageError("query: give --text, --filter, or both");
            op = text.empty() ? "query_structured" : filter.empty() ? "query_semantic" : "query_hybrid";
            if (!text.empty()) args = Json{{"text", text}, {"k", k}};
            if (!filter.empty()) args["filter"] = json_arg("--filter", filter);
        } else if (update->parsed()) {
            op = "update";
            args = Json{{"id", id}, {"mode", mode}, {"content", content}, {"sources", tags},
                        {"expected_version", expected_version}};
        } else if (transition->parsed()) {
            op = "transition";
            args = Json{{"id", id}, {"event", event}, {"merge_target", merge_target}, {"restore_version", restore_version}};
        } else if (promote->parsed()) {
            op = "promote";
            args = Json{{"id", id}};
        } else if (evict->parsed()) {
            op = "evict";
            args = Json{{"namespace", ns}};
            if (capacity > 0) args["capacity"] = capacity;
        } else if (dump->parsed()) {
            op = "dump";
            args = Json{{"include_audit", include_audit}};
            if (!filter.empty()) args["filter"] = json_arg("--filter", filter);
        } else if (import->parsed()) {
            op = "load";
            const std::string bytes = read_file(payload_file);
            const std::span<const std::uint8_t> raw(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
            args = Json{{"archive", base64_encode(raw)}, {"namespace", ns}};
        } else if (publish->parsed()) {
            op = "publish";
            Json license = Json::object();
            if (max_calls > 0) license["max_calls"] = max_calls;
            if (!expires.empty()) license["expires_at"] = expires;
            if (!fee_token.empty()) license["fee_token"] = fee_token;
            args = Json{{"id", id}, {"visibility", Json{{"kind", vis}, {"allow", allow}}}, {"license", license}};
        } else if (pull->parsed()) {
            op = "pull";
            args = Json{{"listing_id", listing}};
            if (!fee_token.empty()) args["fee_token"] = fee_token;
            if (!install_ns.empty()) args["install_namespace"] = install_ns;
        } else if (subscribe->parsed()) {
            op = "subscribe";
            args = Json{{"subscription", json_arg("subscription", sub)}};
        } else if (audit->parsed()) {
            op = "audit_query";
            if (!audit_actor.empty()) args["actor"] = audit_actor;
            if (!audit_cube.empty()) args["cube_id"] = audit_cube;
            if (!audit_op.empty()) args["op"] = audit_op;
            if (!from.empty()) args["from"] = from;
            if (!to.empty()) args["to"] = to;
        } else if (tick->parsed()) {
            op = "tick";
        } else if (simulate->parsed()) {
            op = "simulate";
            args = Json{{"trace", json_arg("trace", read_file(trace_file))}};
            if (!replay_cfg.empty()) args["config"] = json_arg("--replay-config", replay_cfg);
        } else if (call->parsed()) {
            if (!args_text.empty()) args = json_arg("--args", args_text);
        }

        WireRequest req;
        req.id = "memctl";
        req.actor = actor;
        req.context.session_id = session;
        req.context.platform = "memctl";
        req.op = op;
        req.args = args;
        if (!idem.empty()) req.idempotency_key = idem;
        if (!now.empty()) {
            try {
                req.now = parse_iso8601(now);
            } catch (const Error& e) {
                throw UsageError("--now: " + e.detail());
            }
        }

        std::unique_ptr<Transport> transport;
        if (addr.empty()) {
            if (const char* env = std::getenv("MEMKERNEL_ADDR"); env != nullptr && *env != '\0' && config_path.empty()) {
                addr = env;
            }
        }
        if (!addr.empty()) {
            transport = std::make_unique<Remote>(parse_listen_address(addr));
        } else {
            transport = std::make_unique<InProcess>(resolve_config(config_path));
        }

        const WireResponse r = transport->call(req);
        if (!r.ok) {
            std::cerr << "error: " << (r.code ? error_code_name(*r.code) : "INTERNAL") << ": " << r.message << '\n';
            return 1;
        }
        if (dump->parsed() && !out_file.empty()) {
            const auto raw = base64_decode(r.body.at("archive").get<std::string>());
            std::ofstream out(out_file, std::ios::binary);
            out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
            if (!out) throw UsageError("cannot write " + out_file);
            Json summary = r.body;
            summary.erase("archive");
            summary["out"] = out_file;
            if (format == "canonical") {
                std::cout << canonical_dump(summary) << '\n';
            } else {
                print_table(std::cout, summary);
            }
            return 0;
        }
        if (format == "canonical") {
            std::cout << canonical_dump(r.body) << '\n';
        } else {
            print_table(std::cout, r.body);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        // Config and transport failures happen before any envelope is answered.
        std::cerr << "error: " << error_code_name(e.code()) << ": " << e.detail() << '\n';
        return e.code() == ErrorCode::InvalidConfig ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: INTERNAL: " << e.what() << '\n';
        return 1;
    }
}
