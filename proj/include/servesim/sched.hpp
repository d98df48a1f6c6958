// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <deque>
#include <unordered_set>
#include <vector>

#include "servesim/core.hpp"
#include "servesim/costmodel.hpp"
#include "servesim/kvcache.hpp"

namespace servesim {

/// Shared scheduler state. wait_queue holds queued request ids in arrival
/// order (FCFS); running holds admitted, unfinished ids in admission order.
struct SchedulerState {
    std::deque<int> wait_queue;
    std::vector<int> running;

    void remove_running(int id);
};

/// Requests whose previous entry is still traversing the pipeline cannot be
/// re-batched; in_flight holds their ids. At pp_degree = 1 it is empty
/// whenever the scheduler runs.
using InFlightSet = std::unordered_set<int>;

// Each policy forms the next batch (possibly empty). Admission moves ids from
// wait_queue to running and registers the KV commitment; physical block
// growth happens in the engine when the batch executes.

/// Decode-prioritizing request-level batching: new requests are admitted only
/// when nothing is running; prompts are prefilled whole.
Batch request_level_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                               const ReplicaConfig& cfg, const InFlightSet& in_flight);

/// Prefill-prioritizing iteration-level batching. Prefills are executed
/// eagerly and batches are never mixed. The prefill-token cap yields to a
/// single oversized prompt, which is admitted alone in a dedicated batch.
Batch vllm_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                      const ReplicaConfig& cfg, const InFlightSet& in_flight);

/// Hybrid iteration-level batching: running decodes plus eagerly admitted
/// full prompts in one batch, under a smaller batch-size cap.
Batch orca_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                      const ReplicaConfig& cfg, const InFlightSet& in_flight);

/// Stall-free batching: pack all ready decodes first, then the in-progress
/// prefill chunks, then admit new requests, keeping total tokens within the
/// token budget. With cfg.hybrid_batching = false decodes and chunks are
/// never coalesced (chunked-prefill-only ablation).
Batch stall_free_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                            const ReplicaConfig& cfg, const InFlightSet& in_flight);

Batch next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                 const ReplicaConfig& cfg, const InFlightSet& in_flight);

/// Largest chunk of this request that fits the leftover budget. The final
/// chunk passes through unaligned; other chunks are floored to a multiple of
/// chunk_align. Returns 0 when no aligned room is left.
int get_next_chunk_size(const Request& r, int token_budget, int packed_tokens, int chunk_align);

struct TokenBudgetSpec {
    int rep_decode_count = 32;
    std::int64_t rep_decode_kv = 4096;
    int chunk_align = 32;
    int max_budget = 8192;
    double pipeline_factor_override = 0.0;  // 0 -> pp_degree
};

/// One-time profiling step: the largest aligned token budget whose
/// representative hybrid batch (reference decodes plus one chunk filling the
/// budget) stays within the TBT SLO after the pipeline factor. Throws
/// InfeasibleSlo when no candidate fits.
int compute_token_budget(double t_max_ms, const CostModelParams& params, int pp_degree,
                         const TokenBudgetSpec& spec = {});

}  // namespace servesim
