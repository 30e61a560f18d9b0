// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Wire protocol. Requests and responses are canonical JSON envelopes:
//
//   request   {"id": "r1", "actor": "alice", "op": "query_semantic",
//              "context": {"session_id": "s1", "purpose": "", "platform": "", "time": null},
//              "args": {"text": "budget", "k": 20},
//              "idempotency_key": "k-17",        optional
//              "now": "2025-01-01T00:00:00Z"}     optional, injected clock only
//
//   response  {"id": "r1", "status": "Ok", "body": {...}, "audit_seq": 42}
//             {"id": "r1", "status": "Err", "code": "VERSION_CONFLICT",
//              "message": "...", "body": null, "audit_seq": 43}
//
// Every response to an envelope with a readable actor carries the seq of
// the single audit record the call produced. A repeated idempotency key
// from the same actor returns the first response without running the op.

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"
#include "memkernel/gateway/config.hpp"
#include "memkernel/interface/kernel.hpp"

#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace memkernel {

struct WireRequest {
    std::string id;
    Identity actor;
    CallContext context;
    std::string op;
    Json args = Json::object();
    std::optional<std::string> idempotency_key;
    std::optional<Timestamp> now;
};

struct WireResponse {
    std::string id;
    bool ok = true;
    std::optional<ErrorCode> code;
    std::string message;
    Json body;
    std::uint64_t audit_seq = 0;
};

Json to_json(const WireRequest& r);
Json to_json(const WireResponse& r);
// Throws Error(BadArgs) with the field path.
WireRequest parse_request(const Json& j);
WireResponse parse_response(const Json& j);

class Gateway {
public:
    explicit Gateway(DeploymentConfig config);
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    WireResponse handle(const WireRequest& request);
    // Never throws: undecodable input yields an Err envelope.
    std::string handle_text(std::string_view bytes);

    std::vector<std::string> ops() const;
    const DeploymentConfig& config() const { return config_; }
    Kernel& kernel() { return *kernel_; }
    ManualClock* injected_clock() { return manual_.get(); }

private:
    using Handler = std::function<Json(const Json& args, const Identity& actor, const CallContext& ctx)>;
    struct Op {
        Handler run;
        AuditOp audit_op = AuditOp::Read;  // recorded when the kernel is not involved
        bool external = false;             // not audited by the kernel itself
    };

    WireResponse dispatch(const WireRequest& request);
    WireResponse fail(const WireRequest& request, const Error& e, bool audit);
    void register_ops();

    DeploymentConfig config_;
    std::unique_ptr<ManualClock> manual_;
    std::unique_ptr<SystemClock> system_;
    std::unique_ptr<Embedder> embedder_;
    std::unique_ptr<Kernel> kernel_;
    std::map<std::string, Op> ops_;

    std::mutex idem_mu_;
    std::map<std::string, std::shared_future<WireResponse>> idem_;
    std::deque<std::string> idem_order_;
};

inline constexpr std::size_t kIdempotencyCapacity = 4096;

}  // namespace memkernel
