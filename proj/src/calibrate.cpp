// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "servesim/costmodel.hpp"

namespace servesim {

namespace {

constexpr int kNumTerms = 5;
const std::array<const char*, kNumTerms> kTermNames = {
    "fixed_overhead_ms", "per_token_linear_ms", "attn_prefill_quad_ms",
    "attn_kv_read_ms", "attn_decode_per_kv_ms"};

// Model is linear in (fixed, p, q, kv, a) once saturation_tokens is fixed:
// linear term = p * max(saturation, tokens * tile_penalty).
std::array<double, kNumTerms> design_row(const Batch& b, int saturation, const CalibrationOptions& opts) {
    CostModelParams pen_probe;
    pen_probe.tile_size = opts.tile_size;
    pen_probe.tile_penalty_frac = opts.tile_penalty_frac;

    const std::int64_t tokens = b.total_tokens();
    std::array<double, kNumTerms> row{};
    row[0] = 1.0;
    row[1] = std::max(static_cast<double>(saturation),
                      static_cast<double>(tokens) * tile_penalty(tokens, pen_probe));
    for (const auto& e : b.entries) {
        if (e.kind == EntryKind::PrefillChunk) {
            const double c = e.chunk_tokens;
            row[2] += c * c;
            row[3] += c * static_cast<double>(e.prefix_tokens);
        } else {
            row[4] += static_cast<double>(e.prefix_tokens);
        }
    }
    return row;
}

// Gaussian elimination with partial pivoting; returns the index of the first
// column whose pivot collapses, or -1 on success.
int solve_normal(std::vector<std::vector<double>>& m, std::vector<double>& rhs,
                 std::vector<double>& out) {
    const int n = static_cast<int>(rhs.size());
    std::vector<int> cols(n);
    for (int i = 0; i < n; ++i) cols[i] = i;

    for (int k = 0; k < n; ++k) {
        int pivot = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(m[i][k]) > std::fabs(m[pivot][k])) pivot = i;
        if (std::fabs(m[pivot][k]) < 1e-12) return k;
        std::swap(m[k], m[pivot]);
        std::swap(rhs[k], rhs[pivot]);
        for (int i = k + 1; i < n; ++i) {
            const double f = m[i][k] / m[k][k];
            for (int j = k; j < n; ++j) m[i][j] -= f * m[k][j];
            rhs[i] -= f * rhs[k];
        }
    }
    out.assign(n, 0.0);
    for (int k = n - 1; k >= 0; --k) {
        double v = rhs[k];
        for (int j = k + 1; j < n; ++j) v -= m[k][j] * out[j];
        out[k] = v / m[k][k];
    }
    return -1;
}

struct FitAttempt {
    bool ok = false;
    int singular_term = -1;
    std::array<double, kNumTerms> coeffs{};
    double sse = std::numeric_limits<double>::infinity();
};

FitAttempt fit_for_saturation(const std::vector<CalibrationAnchor>& anchors, int saturation,
                              const std::vector<int>& active, const CalibrationOptions& opts) {
    FitAttempt att;
    const int n = static_cast<int>(active.size());
    std::vector<std::vector<double>> ata(n, std::vector<double>(n, 0.0));
    std::vector<double> atb(n, 0.0);

    for (const auto& a : anchors) {
        const auto full = design_row(a.batch, saturation, opts);
        const double w = 1.0 / (a.observed_ms * a.observed_ms);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) ata[i][j] += w * full[active[i]] * full[active[j]];
            atb[i] += w * full[active[i]] * a.observed_ms;
        }
    }

    std::vector<double> sol;
    const int bad = solve_normal(ata, atb, sol);
    if (bad >= 0) {
        att.singular_term = active[bad];
        return att;
    }
    // Negative rates are unphysical; clamp and keep the attempt comparable.
    for (auto& v : sol) v = std::max(v, 0.0);

    att.ok = true;
    for (int i = 0; i < n; ++i) att.coeffs[active[i]] = sol[i];

    double sse = 0.0;
    for (const auto& a : anchors) {
        const auto full = design_row(a.batch, saturation, opts);
        double pred = 0.0;
        for (int t = 0; t < kNumTerms; ++t) pred += att.coeffs[t] * full[t];
        const double r = (pred - a.observed_ms) / a.observed_ms;
        sse += r * r;
    }
    att.sse = sse;
    return att;
}

}  // namespace

CalibrationResult calibrate(const std::vector<CalibrationAnchor>& anchors,
                            const CalibrationOptions& opts) {
    if (anchors.size() < 4)
        throw CalibrationError("calibration needs at least 4 anchors spanning both regimes");

    bool has_decode = false, has_prefill = false;
    for (const auto& a : anchors) {
        if (a.observed_ms <= 0) throw CalibrationError("observed timings must be positive");
        if (a.batch.empty()) throw CalibrationError("anchor batch must be non-empty");
        if (a.batch.decode_only()) has_decode = true;
        if (a.batch.prefill_tokens() > 0) has_prefill = true;
    }
    if (!has_decode || !has_prefill)
        throw CalibrationError(
            "anchors must include a memory-bound decode batch and a compute-bound prefill");

    // Terms no anchor exercises cannot be identified; pin them to zero.
    std::array<bool, kNumTerms> exercised{};
    for (const auto& a : anchors) {
        const auto row = design_row(a.batch, 1, opts);
        for (int t = 0; t < kNumTerms; ++t)
            if (row[t] != 0.0) exercised[t] = true;
    }
    std::vector<int> active;
    std::vector<std::string> zeroed;
    for (int t = 0; t < kNumTerms; ++t) {
        if (exercised[t]) active.push_back(t);
        else zeroed.emplace_back(kTermNames[t]);
    }

    FitAttempt best;
    int best_sat = 1;
    int first_singular = -1;
    for (int sat = 1; sat <= opts.max_saturation_tokens; ++sat) {
        const FitAttempt att = fit_for_saturation(anchors, sat, active, opts);
        if (!att.ok) {
            if (first_singular < 0) first_singular = att.singular_term;
            continue;
        }
        if (att.sse < best.sse - 1e-15) {
            best = att;
            best_sat = sat;
        }
    }
    if (!best.ok) {
        std::string msg = "calibration under-determined; unconstrained parameters:";
        msg += " ";
        msg += first_singular >= 0 ? kTermNames[first_singular] : "saturation_tokens";
        msg += " (with saturation_tokens)";
        throw CalibrationError(msg);
    }

    CalibrationResult res;
    res.params.name = "calibrated";
    res.params.fixed_overhead_ms = best.coeffs[0];
    res.params.per_token_linear_ms = best.coeffs[1];
    res.params.saturation_tokens = best_sat;
    res.params.attn_prefill_quad_ms = best.coeffs[2];
    res.params.attn_kv_read_ms = best.coeffs[3];
    res.params.attn_decode_per_kv_ms = best.coeffs[4];
    res.params.tile_size = opts.tile_size;
    res.params.tile_penalty_frac = opts.tile_penalty_frac;
    res.zeroed_terms = std::move(zeroed);

    for (const auto& a : anchors) {
        const double pred = iteration_time(a.batch, res.params);
        res.predicted_ms.push_back(pred);
        const double rel = std::fabs(pred - a.observed_ms) / a.observed_ms;
        res.relative_error.push_back(rel);
        res.max_relative_error = std::max(res.max_relative_error, rel);
    }
    return res;
}

}  // namespace servesim
