// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once
// Linear time-to-first-token model shared by both injection paths:
//
//   dir_ttft = c0 + c1 * (ctx + qry)      prompt injection prefills everything
//   kv_ttft  = c0 + c1 * qry + c2         KV injection prefills the query only
//
// Both equations are fitted jointly by least squares with each residual
// scaled by its observed duration, so short and long rows weigh the same.

#include <span>
#include <string>
#include <vector>

namespace memkernel {

struct TtftRow {
    std::string model;
    std::string ctx_label;
    double ctx_tokens = 0;
    std::string qry_label;
    double qry_tokens = 0;
    double build_s = 0;
    double kv_ttft_s = 0;
    double dir_ttft_s = 0;
    double speedup_pct = 0;  // as reported
};

struct CostModel {
    std::string label;
    double c0 = 0;  // fixed overhead, s
    double c1 = 0;  // prefill, s/token
    double c2 = 0;  // KV lookup, s

    double dir_ttft(double ctx, double qry) const { return c0 + c1 * (ctx + qry); }
    double kv_ttft(double qry) const { return c0 + c1 * qry + c2; }
};

// Throws Error(BadArgs) below 3 rows or on non-positive durations,
// Error(DegenerateFit) when the design is rank deficient. Negative
// coefficients are clamped to 0 and the rest refitted.
CostModel fit_cost_model(std::span<const TtftRow> rows, std::string label = {});

// 100 * (1 - kv / dir).
double predict_speedup(const CostModel& model, double ctx, double qry);

// The 27 measured rows: three models, 3 context x 3 query lengths each.
const std::vector<TtftRow>& reference_ttft_rows();
std::vector<TtftRow> rows_for(const std::string& model);
std::vector<std::string> reference_ttft_models();

struct HoldoutResult {
    TtftRow row;
    CostModel model;
    double predicted_pct = 0;
    double error_pp = 0;  // predicted - reported
};

std::vector<HoldoutResult> leave_one_out(std::span<const TtftRow> rows);

}  // namespace memkernel
