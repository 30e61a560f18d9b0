// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Pipeline documents. A spec is an ordered list of steps that share a working
// set of cube ids; the document is canonical JSON like every other carrier:
//
//   {"steps": [
//     {"name": "fetch",   "op": "Retrieve",   "args": {"query": "medication", "k": 5}},
//     {"name": "context", "op": "Augment",    "args": {"text": "fever since monday"}},
//     {"name": "write",   "op": "Update",     "args": {"mode": "Append"}},
//     {"name": "close",   "op": "Archive",    "args": {}}]}
//
// Step args:
//   Retrieve    ids | filter | query [+ k] | prompt   (filter + query is hybrid)
//   Augment     text                       appends to the pipeline context
//   Update      mode (Append|Overwrite), content (defaults to the context), label
//   Provenance  trigger, context, model_id, external_links
//   Archive     none

#include "memkernel/core/codec.hpp"
#include "memkernel/core/errors.hpp"
#include "memkernel/core/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace memkernel {

enum class StepOp { Retrieve, Augment, Update, Provenance, Archive };
std::string_view to_string(StepOp op) noexcept;
StepOp parse_step_op(std::string_view s);  // throws Error(BadArgs)

struct PipelineStep {
    std::string name;
    StepOp op = StepOp::Retrieve;
    Json args = Json::object();
    bool operator==(const PipelineStep&) const = default;
};

struct PipelineSpec {
    std::vector<PipelineStep> steps;
    void check() const;  // throws Error(BadArgs): no steps, duplicate or empty names, non-object args
    bool operator==(const PipelineSpec&) const = default;
};

void to_json(Json& j, const PipelineStep& s);
void from_json(const Json& j, PipelineStep& s);
void to_json(Json& j, const PipelineSpec& s);
void from_json(const Json& j, PipelineSpec& s);

struct StepResult {
    std::string name;
    StepOp op = StepOp::Retrieve;
    bool ok = true;
    std::vector<CubeId> working_set;  // after the step
    std::string detail;
    std::optional<ErrorCode> error;
    std::uint64_t audit_seq = 0;
    bool operator==(const StepResult&) const = default;
};

struct PipelineResult {
    std::vector<StepResult> steps;  // executed steps, the failing one last
    std::vector<CubeId> working_set;
    bool committed = false;
    std::optional<ErrorCode> error;  // StepFailed or AuthorizationFailed
    std::string failed_step;
    std::string message;
    bool operator==(const PipelineResult&) const = default;
};

void to_json(Json& j, const StepResult& r);
void to_json(Json& j, const PipelineResult& r);

}  // namespace memkernel
