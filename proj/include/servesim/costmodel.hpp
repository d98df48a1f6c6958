// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <string>
#include <vector>

#include "servesim/core.hpp"

namespace servesim {

/// Analytical iteration-time model for one (model, parallelism) pair.
///
/// The linear-operator time follows a roofline: flat at mem_floor_ms while the
/// batch is memory-bound, then per_token_linear_ms per token once the token
/// count crosses saturation_tokens. Attention is split into a within-chunk
/// quadratic term, a cross-chunk KV re-read term and a per-KV-token decode
/// term. Token counts off the hardware tile size pay a multiplicative penalty
/// on the compute-bound branch only.
struct CostModelParams {
    std::string name;
    int hidden_size = 0;       // informational
    int ffn_hidden_size = 0;   // informational

    double per_token_linear_ms = 0.0;
    int saturation_tokens = 1;

    double attn_prefill_quad_ms = 0.0;   // per token^2 within a chunk
    double attn_kv_read_ms = 0.0;        // per chunk_token x prefix_token
    double attn_decode_per_kv_ms = 0.0;  // per KV token per decode entry
    double fixed_overhead_ms = 0.0;
    double tp_comm_ms = 0.0;
    double pp_send_ms = 0.0;             // per micro-batch stage hop

    int tile_size = 256;
    double tile_penalty_frac = 0.32;

    // Regime continuity: the memory-bound floor meets the compute slope at
    // saturation_tokens exactly.
    double mem_floor_ms() const { return per_token_linear_ms * saturation_tokens; }
    void validate() const;
};

/// max(T_mem, T_math) for the aggregated linear operators; 0 for an empty batch.
double linear_time(std::int64_t tokens, const CostModelParams& p);

/// 1.0 on tile-aligned (or zero) token counts, 1 + tile_penalty_frac otherwise.
/// Applied to the compute-bound branch of linear_time only.
double tile_penalty(std::int64_t tokens, const CostModelParams& p);

/// Attention cost of one prefill chunk: quadratic within the chunk plus a
/// re-read of the prefix KV written by earlier chunks of the same prompt.
double attn_prefill_chunk_time(std::int64_t chunk, std::int64_t prefix, const CostModelParams& p);

/// Attention cost of a decode batch as a function of per-request KV lengths.
double attn_decode_time(const std::vector<std::int64_t>& kv_lengths, const CostModelParams& p);

/// Full iteration time of a batch, in milliseconds. tp_degree shards the
/// linear terms (floor and slope); tp_comm_ms is added flat. The result is
/// divided by pp_degree: each stage runs 1/pp of the layers.
double iteration_time(const Batch& batch, const CostModelParams& p,
                      int tp_degree = 1, int pp_degree = 1);

/// Iteration time of the reference decode batch (32 requests at 4k KV each);
/// anchors the SLO derivation.
double decode_reference_time(const CostModelParams& p);

Batch make_decode_batch(int batch_size, std::int64_t kv_per_request);
Batch make_prefill_batch(std::int64_t prompt_tokens);

// ============================================================================
// Calibration
// ============================================================================

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CalibrationAnchor {
    Batch batch;
    double observed_ms = 0.0;
};

struct CalibrationResult {
    CostModelParams params;
    std::vector<double> predicted_ms;
    std::vector<double> relative_error;
    double max_relative_error = 0.0;
    std::vector<std::string> zeroed_terms;  // terms no anchor exercises, fixed at 0
};

struct CalibrationOptions {
    int tile_size = 256;
    double tile_penalty_frac = 0.32;
    int max_saturation_tokens = 2048;
};

/// Least-squares fit of the timing constants against observed batch timings,
/// minimizing relative error. Requires at least 4 anchors spanning both the
/// memory-bound and compute-bound regimes. Throws CalibrationError naming the
/// unconstrained parameters when the anchor set cannot identify them.
CalibrationResult calibrate(const std::vector<CalibrationAnchor>& anchors,
                            const CalibrationOptions& opts = {});

}  // namespace servesim
