// Copyright 2026 The memkernel Authors
// SPDX-License-Identifier: Apache-2.0

#include "memkernel/harness/cost_model.hpp"

#include "memkernel/core/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <set>

namespace memkernel {

namespace {

std::vector<TtftRow> build_table()
{
    struct Cell {
        double build, kv, dir, speedup;
    };
    const std::array<std::pair<const char*, double>, 3> ctx{{{"long", 6064}, {"medium", 2773}, {"short", 583}}};
    const std::array<std::pair<const char*, double>, 3> qry{{{"long", 952.7}, {"medium", 302.7}, {"short", 167}}};
    const std::array<std::pair<const char*, std::array<Cell, 9>>, 3> models{{
        {"Qwen3-8B",
         {{{0.92, 0.50, 2.37, 79.1},
           {0.93, 0.19, 2.16, 91.1},
           {0.93, 0.12, 2.04, 94.2},
           {0.41, 0.43, 1.22, 64.6},
           {0.41, 0.16, 1.08, 85.1},
           {0.43, 0.10, 0.95, 89.7},
           {0.12, 0.39, 0.51, 23.0},
           {0.12, 0.14, 0.32, 55.6},
           {0.12, 0.08, 0.29, 71.3}}}},
        {"Qwen3-32B",
         {{{0.71, 0.31, 1.09, 71.4},
           {0.71, 0.15, 0.98, 84.3},
           {0.71, 0.11, 0.96, 88.8},
           {0.31, 0.24, 0.56, 56.9},
           {0.31, 0.12, 0.47, 75.1},
           {0.31, 0.08, 0.44, 81.2},
           {0.09, 0.20, 0.24, 18.6},
           {0.09, 0.09, 0.15, 39.6},
           {0.09, 0.07, 0.14, 53.5}}}},
        {"Qwen2.5-72B",
         {{{1.26, 0.48, 2.04, 76.4},
           {1.26, 0.23, 1.82, 87.2},
           {1.27, 0.15, 1.79, 91.4},
           {0.58, 0.39, 1.05, 62.7},
           {0.58, 0.18, 0.89, 79.2},
           {0.71, 0.23, 0.82, 71.6},
           {0.16, 0.33, 0.43, 23.8},
           {0.16, 0.15, 0.27, 43.2},
           {0.16, 0.10, 0.25, 60.5}}}},
    }};
    std::vector<TtftRow> out;
    for (const auto& [model, cells] : models) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto& [cl, ct] = ctx[i / 3];
            const auto& [ql, qt] = qry[i % 3];
            const auto& c = cells[i];
            out.push_back(TtftRow{model, cl, ct, ql, qt, c.build, c.kv, c.dir, c.speedup});
        }
    }
    return out;
}

}  // namespace

CostModel fit_cost_model(std::span<const TtftRow> rows, std::string label)
{
    if (rows.size() < 3) throw Error(ErrorCode::BadArgs, "cost model fit needs at least 3 rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd a(2 * n, 3);
    Eigen::VectorXd b(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (!(r.dir_ttft_s > 0) || !(r.kv_ttft_s > 0) || r.ctx_tokens < 0 || r.qry_tokens < 0) {
            throw Error(ErrorCode::BadArgs, "row " + std::to_string(i) + ": durations must be positive");
        }
        a.row(2 * i) << 1.0 / r.dir_ttft_s, (r.ctx_tokens + r.qry_tokens) / r.dir_ttft_s, 0.0;
        b(2 * i) = 1.0;
        a.row(2 * i + 1) << 1.0 / r.kv_ttft_s, r.qry_tokens / r.kv_ttft_s, 1.0 / r.kv_ttft_s;
        b(2 * i + 1) = 1.0;
    }

    std::vector<int> free{0, 1, 2};
    Eigen::Vector3d x = Eigen::Vector3d::Zero();
    while (!free.empty()) {
        Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(free.size()));
        for (std::size_t j = 0; j < free.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = a.col(free[j]);
        const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
        if (qr.rank() < sub.cols()) throw Error(ErrorCode::DegenerateFit, "rank-deficient TTFT rows");
        const Eigen::VectorXd sol = qr.solve(b);
        x.setZero();
        for (std::size_t j = 0; j < free.size(); ++j) x(free[j]) = sol(static_cast<Eigen::Index>(j));
        const auto worst = std::min_element(free.begin(), free.end(), [&](int p, int q) { return x(p) < x(q); });
        if (x(*worst) >= 0) break;
        free.erase(worst);
    }
    if (x(1) <= 0) throw Error(ErrorCode::DegenerateFit, "no positive per-token prefill cost");
    return CostModel{std::move(label), x(0), x(1), x(2)};
}

double predict_speedup(const CostModel& m, double ctx, double qry)
{
    return 100.0 * (1.0 - m.kv_ttft(qry) / m.dir_ttft(ctx, qry));
}

const std::vector<TtftRow>& reference_ttft_rows()
{
    static const std::vector<TtftRow> rows = build_table();
    return rows;
}

std::vector<TtftRow> rows_for(const std::string& model)
{
    std::vector<TtftRow> out;
    std::copy_if(reference_ttft_rows().begin(), reference_ttft_rows().end(), std::back_inserter(out),
                 [&](const TtftRow& r) { return r.model == model; });
    return out;
}

std::vector<std::string> reference_ttft_models()
{
    std::vector<std::string> out;
    for (const auto& r : reference_ttft_rows()) {
        if (std::find(out.begin(), out.end(), r.model) == out.end()) out.push_back(r.model);
    }
    return out;
}

std::vector<HoldoutResult> leave_one_out(std::span<const TtftRow> rows)
{
    std::vector<HoldoutResult> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<TtftRow> rest;
        for (std::size_t j = 0; j < rows.size(); ++j) {
            if (j != i) rest.push_back(rows[j]);
        }
        HoldoutResult h;
        h.row = rows[i];
        h.model = fit_cost_model(rest, rows[i].model);
        h.predicted_pct = predict_speedup(h.model, rows[i].ctx_tokens, rows[i].qry_tokens);
        h.error_pp = h.predicted_pct - rows[i].speedup_pct;
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace memkernel
