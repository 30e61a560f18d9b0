// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/interface/pipeline.hpp"

#include <array>
#include <set>

namespace memkernel {

namespace {

constexpr std::array<std::pair<StepOp, std::string_view>, 5> kStepOps{{
    {StepOp::Retrieve, "Retrieve"},
    {StepOp::Augment, "Augment"},
    {StepOp::Update, "Update"},
    {StepOp::Provenance, "Provenance"},
    {StepOp::Archive, "Archive"},
}};

}  // namespace

std::string_view to_string(StepOp op) noexcept
{
    for (const auto& [k, n] : kStepOps) {
        if (k == op) return n;
    }
    return "?";
}

StepOp parse_step_op(std::string_view s)
{
    for (const auto& [k, n] : kStepOps) {
        if (n == s) return k;
    }
    throw Error(ErrorCode::BadArgs, "unknown pipeline step op '" + std::string(s) + "'");
}

void PipelineSpec::check() const
{
    if (steps.empty()) throw Error(ErrorCode::BadArgs, "pipeline needs at least one step");
    std::set<std::string> names;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        if (s.name.empty()) throw Error(ErrorCode::BadArgs, "steps[" + std::to_string(i) + "].name is empty");
        if (!names.insert(s.name).second) throw Error(ErrorCode::BadArgs, "duplicate step name '" + s.name + "'");
        if (!s.args.is_object()) throw Error(ErrorCode::BadArgs, "steps[" + std::to_string(i) + "].args must be an object");
    }
}

void to_json(Json& j, const PipelineStep& s)
{
    j = Json{{"name", s.name}, {"op", std::string(to_string(s.op))}, {"args", s.args}};
}

void from_json(const Json& j, PipelineStep& s)
{
    s.name = j.at("name").get<std::string>();
    s.op = parse_step_op(j.at("op").get<std::string>());
    s.args = j.value("args", Json::object());
}

void to_json(Json& j, const PipelineSpec& s) { j = Json{{"steps", s.steps}}; }

void from_json(const Json& j, PipelineSpec& s) { s.steps = j.at("steps").get<std::vector<PipelineStep>>(); }

void to_json(Json& j, const StepResult& r)
{
    j = Json{{"name", r.name},
             {"op", std::string(to_string(r.op))},
             {"ok", r.ok},
             {"working_set", r.working_set},
             {"detail", r.detail},
             {"error", r.error ? Json(std::string(error_code_name(*r.error))) : Json(nullptr)},
             {"audit_seq", r.audit_seq}};
}

void to_json(Json& j, const PipelineResult& r)
{
    j = Json{{"steps", r.steps},
             {"working_set", r.working_set},
             {"committed", r.committed},
             {"error", r.error ? Json(std::string(error_code_name(*r.error))) : Json(nullptr)},
             {"failed_step", r.failed_step},
             {"message", r.message}};
}

}  // namespace memkernel
