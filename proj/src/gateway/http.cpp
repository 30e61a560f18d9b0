// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/gateway/http.hpp"

#include <httplib.h>

namespace memkernel {

namespace {

constexpr const char* kJson = "application/json";
constexpr std::size_t kMaxBody = 64u << 20;

std::string error_envelope(const std::string& id, ErrorCode code, const std::string& message)
{
    WireResponse r;
    r.id = id;
    r.ok = false;
    r.code = code;
    r.message = message;
    r.body = nullptr;
    return canonical_dump(to_json(r));
}

}  // namespace

struct HttpServer::Impl {
    explicit Impl(Gateway& g) : gateway(g) {}
    Gateway& gateway;
    httplib::Server server;
    bool bound = false;
};

HttpServer::HttpServer(Gateway& gateway) : impl_(std::make_unique<Impl>(gateway))
{
    auto& s = impl_->server;
    s.set_payload_max_length(kMaxBody);
    s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(canonical_dump(Json{{"status", "ok"}, {"deployment_id", impl_->gateway.config().deployment_id}}),
                        kJson);
    });
    s.Get("/v1/ops", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(canonical_dump(Json{{"ops", impl_->gateway.ops()}}), kJson);
    });
    s.Post(R"(/v1/([A-Za-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
        const std::string op = req.matches[1];
        Json j = Json::parse(req.body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            // Let the gateway produce the decode error.
            res.set_content(impl_->gateway.handle_text(req.body), kJson);
            return;
        }
        const std::string id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "";
        if (j.contains("op") && !j["op"].is_null()) {
            if (!j["op"].is_string() || j["op"].get<std::string>() != op) {
                res.set_content(error_envelope(id, ErrorCode::BadArgs, "op: does not match the path /v1/" + op), kJson);
                return;
            }
        }
        j["op"] = op;
        if ((!j.contains("actor") || j["actor"].is_null()) && req.has_header("X-Memkernel-Actor")) {
            j["actor"] = req.get_header_value("X-Memkernel-Actor");
        }
        res.set_content(impl_->gateway.handle_text(j.dump()), kJson);
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const ListenAddress& address)
{
    int port = address.port;
    bool ok = false;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(address.host);
        ok = port > 0;
    } else {
        ok = impl_->server.bind_to_port(address.host, port);
    }
    if (!ok) {
        throw Error(ErrorCode::Internal, "cannot bind " + address.host + ":" + std::to_string(address.port));
    }
    impl_->bound = true;
    return port;
}

void HttpServer::serve()
{
    if (!impl_->bound) throw Error(ErrorCode::Internal, "serve before bind");
    impl_->server.listen_after_bind();
}

void HttpServer::start()
{
    if (!impl_->bound) throw Error(ErrorCode::Internal, "start before bind");
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void HttpServer::stop()
{
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

struct HttpClient::Impl {
    explicit Impl(const ListenAddress& a) : client(a.host, a.port) {}
    httplib::Client client;
};

HttpClient::HttpClient(const ListenAddress& address) : impl_(std::make_unique<Impl>(address))
{
    impl_->client.set_read_timeout(std::chrono::seconds(60));
}

HttpClient::~HttpClient() = default;

std::string HttpClient::post_raw(const std::string& op, const std::string& body)
{
    auto res = impl_->client.Post("/v1/" + op, body, kJson);
    if (!res) throw Error(ErrorCode::Internal, "transport: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::Internal, "transport: HTTP " + std::to_string(res->status));
    return res->body;
}

WireResponse HttpClient::call(const WireRequest& request)
{
    const std::string reply = post_raw(request.op, canonical_dump(to_json(request)));
    const Json j = Json::parse(reply, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::DecodeError, "reply is not JSON");
    return parse_response(j);
}

}  // namespace memkernel
