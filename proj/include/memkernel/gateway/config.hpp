// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Deployment configuration, read from canonical JSON:
//
//   {"deployment_id": "clinic-a",
//    "listen": "127.0.0.1:7070",
//    "clock": {"mode": "Injected", "start": "2025-01-01T00:00:00Z"},
//    "embedder": {"id": "hashed-bow-v1", "dim": 256},
//    "namespaces": [{"name": "clinic", "kind": "UserPrivate", ...}],
//    "admins": ["root"],
//    "weights": {...}, "migration": {...}, "cache": {...},
//    "ruleset": {...},
//    "audit_file": "audit.jsonl", "exchange_file": "exchange.jsonl",
//    "recover": false, "id_seed": 0}
//
// Every key except "namespaces" is optional. Relative file paths resolve
// against the directory of the config file.

#include "memkernel/core/codec.hpp"
#include "memkernel/interface/kernel.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace memkernel {

enum class ClockMode { Real, Injected };
std::string_view to_string(ClockMode m) noexcept;
ClockMode parse_clock_mode(std::string_view s);  // throws Error(InvalidConfig)

struct ListenAddress {
    std::string host = "127.0.0.1";
    int port = 7070;
};

// "host:port"; throws Error(InvalidConfig).
ListenAddress parse_listen_address(std::string_view text);

struct DeploymentConfig {
    std::string deployment_id = "local";
    std::string listen = "127.0.0.1:7070";
    ClockMode clock_mode = ClockMode::Injected;
    Timestamp clock_start = Timestamp::from_seconds(1'735'689'600);
    std::string embedder_id = "hashed-bow-v1";
    std::size_t embedder_dim = kFingerprintDim;
    std::vector<NamespaceDescriptor> namespaces;
    std::set<Identity> admins;
    ScheduleWeights weights;
    MigrationRule rule;
    HotCacheConfig cache;
    SensitivityRuleset ruleset;
    std::optional<std::filesystem::path> audit_file;
    std::optional<std::filesystem::path> exchange_file;
    bool recover = false;
    std::uint64_t id_seed = 0;

    // Throws Error(InvalidConfig).
    void check() const;
    KernelConfig kernel_config() const;
    // MEMKERNEL_ADDR overrides `listen` when set.
    ListenAddress listen_address() const;
};

void to_json(Json& j, const DeploymentConfig& c);
// Throws Error(InvalidConfig) naming the offending key.
DeploymentConfig parse_deployment_config(const Json& j, const std::filesystem::path& base_dir = {});
DeploymentConfig load_deployment_config(const std::filesystem::path& file);

// One in-memory namespace "default", injected clock.
DeploymentConfig default_deployment_config();

}  // namespace memkernel
