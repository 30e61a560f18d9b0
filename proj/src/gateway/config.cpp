// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/gateway/config.hpp"

#include "memkernel/core/errors.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

namespace memkernel {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what)
{
    throw Error(ErrorCode::InvalidConfig, key + ": " + what);
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& prefix = {})
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        bad(prefix + key, e.what());
    } catch (const Error& e) {
        bad(prefix + key, e.detail());
    }
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base)
{
    return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

std::string_view to_string(ClockMode m) noexcept { return m == ClockMode::Real ? "Real" : "Injected"; }

ClockMode parse_clock_mode(std::string_view s)
{
    if (s == "Real") return ClockMode::Real;
    if (s == "Injected") return ClockMode::Injected;
    throw Error(ErrorCode::InvalidConfig, "clock.mode must be Real or Injected, got '" + std::string(s) + "'");
}

ListenAddress parse_listen_address(std::string_view text)
{
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) bad("listen", "expected host:port, got '" + std::string(text) + "'");
    ListenAddress a;
    a.host = std::string(text.substr(0, colon));
    const auto port = text.substr(colon + 1);
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), a.port);
    if (ec != std::errc() || ptr != port.data() + port.size() || a.port < 0 || a.port > 65535) {
        bad("listen", "bad port '" + std::string(port) + "'");
    }
    return a;
}

void DeploymentConfig::check() const
{
    if (deployment_id.empty()) bad("deployment_id", "empty");
    if (namespaces.empty()) bad("namespaces", "at least one namespace is required");
    std::set<std::string> names;
    for (const auto& n : namespaces) {
        if (!names.insert(n.name).second) bad("namespaces", "duplicate namespace '" + n.name + "'");
    }
    if (embedder_id != "hashed-bow-v1") bad("embedder.id", "unknown embedder '" + embedder_id + "'");
    if (embedder_dim == 0) bad("embedder.dim", "must be positive");
    weights.check();
    rule.check();
    Redactor{ruleset};
    parse_listen_address(listen);
}

KernelConfig DeploymentConfig::kernel_config() const
{
    KernelConfig k;
    k.deployment_id = deployment_id;
    k.admins = admins;
    k.weights = weights;
    k.rule = rule;
    k.cache = cache;
    k.ruleset = ruleset;
    k.audit_file = audit_file;
    k.exchange_file = exchange_file;
    k.recover = recover;
    k.id_seed = id_seed;
    return k;
}

ListenAddress DeploymentConfig::listen_address() const
{
    if (const char* env = std::getenv("MEMKERNEL_ADDR"); env != nullptr && *env != '\0') {
        return parse_listen_address(env);
    }
    return parse_listen_address(listen);
}

void to_json(Json& j, const DeploymentConfig& c)
{
    j = Json{{"deployment_id", c.deployment_id},
             {"listen", c.listen},
             {"clock", Json{{"mode", std::string(to_string(c.clock_mode))}, {"start", c.clock_start}}},
             {"embedder", Json{{"id", c.embedder_id}, {"dim", c.embedder_dim}}},
             {"namespaces", c.namespaces},
             {"admins", c.admins},
             {"weights",
              Json{{"w_sim", c.weights.w_sim},
                   {"w_freq", c.weights.w_freq},
                   {"w_rec", c.weights.w_rec},
                   {"w_pri", c.weights.w_pri},
                   {"tau_recency", c.weights.tau_recency},
                   {"f_cap", c.weights.f_cap}}},
             {"migration",
              Json{{"theta_promote", c.rule.theta_promote},
                   {"theta_demote", c.rule.theta_demote},
                   {"theta_distill_sessions", c.rule.theta_distill_sessions},
                   {"window_seconds", c.rule.window_seconds}}},
             {"cache",
              Json{{"c_hot", c.cache.c_hot},
                   {"window_seconds", c.cache.window_seconds},
                   {"c_cold", c.cache.c_cold},
                   {"drift_delta", c.cache.drift_delta},
                   {"centroid_queries", c.cache.centroid_queries}}},
             {"ruleset", c.ruleset},
             {"audit_file", c.audit_file ? Json(c.audit_file->string()) : Json(nullptr)},
             {"exchange_file", c.exchange_file ? Json(c.exchange_file->string()) : Json(nullptr)},
             {"recover", c.recover},
             {"id_seed", c.id_seed}};
}

DeploymentConfig parse_deployment_config(const Json& j, const std::filesystem::path& base_dir)
{
    if (!j.is_object()) bad("config", "must be an object");
    static const std::set<std::string> known{"deployment_id", "listen",  "clock",   "embedder",   "namespaces",
                                             "admins",        "weights", "migration", "cache",    "ruleset",
                                             "audit_file",    "exchange_file", "recover", "id_seed"};
    for (const auto& [k, v] : j.items()) {
        if (!known.contains(k)) bad(k, "unknown key");
    }
    DeploymentConfig c;
    read(j, "deployment_id", c.deployment_id);
    read(j, "listen", c.listen);
    if (j.contains("clock")) {
        const Json& cl = j.at("clock");
        std::string mode = std::string(to_string(c.clock_mode));
        read(cl, "mode", mode, "clock.");
        c.clock_mode = parse_clock_mode(mode);
        read(cl, "start", c.clock_start, "clock.");
    }
    if (j.contains("embedder")) {
        read(j.at("embedder"), "id", c.embedder_id, "embedder.");
        read(j.at("embedder"), "dim", c.embedder_dim, "embedder.");
    }
    read(j, "namespaces", c.namespaces);
    for (auto& n : c.namespaces) {
        if (!n.adapter.directory.empty()) n.adapter.directory = resolve(n.adapter.directory, base_dir);
    }
    read(j, "admins", c.admins);
    if (j.contains("weights")) {
        const Json& w = j.at("weights");
        read(w, "w_sim", c.weights.w_sim, "weights.");
        read(w, "w_freq", c.weights.w_freq, "weights.");
        read(w, "w_rec", c.weights.w_rec, "weights.");
        read(w, "w_pri", c.weights.w_pri, "weights.");
        read(w, "tau_recency", c.weights.tau_recency, "weights.");
        read(w, "f_cap", c.weights.f_cap, "weights.");
    }
    if (j.contains("migration")) {
        const Json& m = j.at("migration");
        read(m, "theta_promote", c.rule.theta_promote, "migration.");
        read(m, "theta_demote", c.rule.theta_demote, "migration.");
        read(m, "theta_distill_sessions", c.rule.theta_distill_sessions, "migration.");
        read(m, "window_seconds", c.rule.window_seconds, "migration.");
    }
    if (j.contains("cache")) {
        const Json& h = j.at("cache");
        read(h, "c_hot", c.cache.c_hot, "cache.");
        read(h, "window_seconds", c.cache.window_seconds, "cache.");
        read(h, "c_cold", c.cache.c_cold, "cache.");
        read(h, "drift_delta", c.cache.drift_delta, "cache.");
        read(h, "centroid_queries", c.cache.centroid_queries, "cache.");
    }
    read(j, "ruleset", c.ruleset);
    for (const char* key : {"audit_file", "exchange_file"}) {
        if (!j.contains(key) || j.at(key).is_null()) continue;
        std::string p;
        read(j, key, p);
        auto& slot = std::string_view(key) == "audit_file" ? c.audit_file : c.exchange_file;
        slot = resolve(p, base_dir);
    }
    read(j, "recover", c.recover);
    read(j, "id_seed", c.id_seed);
    c.check();
    return c;
}

DeploymentConfig load_deployment_config(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config " + file.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
    }
    return parse_deployment_config(j, file.parent_path());
}

DeploymentConfig default_deployment_config()
{
    DeploymentConfig c;
    NamespaceDescriptor d;
    d.name = "default";
    c.namespaces.push_back(d);
    return c;
}

}  // namespace memkernel
