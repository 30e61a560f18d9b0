// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"
#include "memkernel/gateway/config.hpp"
#include "memkernel/gateway/gateway.hpp"
#include "memkernel/gateway/http.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace memkernel;

namespace {

// Accepts str or bytes.
std::string as_text(const py::object& o) { return o.cast<std::string>(); }

std::unique_ptr<Gateway> make_gateway(const std::optional<std::string>& config_json, const std::optional<std::string>& path)
{
    if (config_json && path) throw Error(ErrorCode::InvalidConfig, "pass a config or a path, not both");
    DeploymentConfig cfg = path ? load_deployment_config(*path)
                                : config_json ? parse_deployment_config(Json::parse(*config_json))
                                              : default_deployment_config();
    return std::make_unique<Gateway>(std::move(cfg));
}

}  // namespace

PYBIND11_MODULE(_memkernel, m)
{
    m.doc() = "In-process memkernel gateway and wire codec";

    static py::exception<Error> error(m, "NativeError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::tuple args = py::make_tuple(std::string(error_code_name(e.code())), e.detail());
            PyErr_SetObject(error.ptr(), args.ptr());
        } catch (const nlohmann::json::exception& e) {
            py::tuple args = py::make_tuple(std::string("DECODE_ERROR"), std::string(e.what()));
            PyErr_SetObject(error.ptr(), args.ptr());
        }
    });

    m.def("error_codes", [] {
        std::vector<std::string> out;
        for (const ErrorCode c : all_error_codes()) out.emplace_back(error_code_name(c));
        return out;
    });

    // Canonical re-encoding of any JSON text.
    m.def("canonical", [](const py::object& text) {
        const std::string s = as_text(text);
        Json j;
        {
            py::gil_scoped_release release;
            j = Json::parse(s);
        }
        return canonical_dump(j);
    });

    py::class_<Gateway>(m, "Gateway")
        .def(py::init(&make_gateway), py::arg("config") = py::none(), py::arg("path") = py::none())
        .def("handle",
             [](Gateway& g, const py::object& envelope) {
                 const std::string in = as_text(envelope);
                 std::string out;
                 {
                     py::gil_scoped_release release;
                     out = g.handle_text(in);
                 }
                 return out;
             })
        .def("ops", &Gateway::ops)
        .def_property_readonly("deployment_id", [](const Gateway& g) { return g.config().deployment_id; });

    py::class_<HttpServer>(m, "Server")
        .def(py::init<Gateway&>(), py::keep_alive<1, 2>())
        .def(
            "start",
            [](HttpServer& s, const std::string& host, int port) {
                const int bound = s.bind(ListenAddress{host, port});
                s.start();
                return bound;
            },
            py::arg("host") = "127.0.0.1", py::arg("port") = 0)
        .def("stop", [](HttpServer& s) {
            py::gil_scoped_release release;
            s.stop();
        });
}
