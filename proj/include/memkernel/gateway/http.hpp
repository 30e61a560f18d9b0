// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// HTTP transport for the wire envelope.
//
//   POST /v1/<op>   body: request envelope; "op" may be omitted, and if
//                   present must equal <op>. "actor" falls back to the
//                   X-Memkernel-Actor header.
//   GET  /v1/ops    {"ops": [...]}
//   GET  /healthz   {"status": "ok", "deployment_id": "..."}
//
// Envelope replies always use HTTP 200; the outcome is in "status".

#include "memkernel/gateway/gateway.hpp"

#include <memory>
#include <string>
#include <thread>

namespace memkernel {

class HttpServer {
public:
    explicit HttpServer(Gateway& gateway);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 picks a free port. Returns the bound port; throws Error(Internal).
    int bind(const ListenAddress& address);
    // Blocks until stop().
    void serve();
    // serve() on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

class HttpClient {
public:
    explicit HttpClient(const ListenAddress& address);
    ~HttpClient();
    HttpClient(const HttpClient&) = delete;
    HttpClient& operator=(const HttpClient&) = delete;

    // Throws Error(Internal) when the transport fails, Error(DecodeError)
    // when the reply is not an envelope.
    WireResponse call(const WireRequest& request);
    std::string post_raw(const std::string& op, const std::string& body);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace memkernel
