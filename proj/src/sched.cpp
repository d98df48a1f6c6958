// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/sched.hpp"

#include <algorithm>

namespace servesim {

namespace {

bool ready(const Request& r, const InFlightSet& in_flight) {
    return in_flight.find(r.id) == in_flight.end();
}

bool kv_admissible(const KvCacheState& kv, const Request& r, const ReplicaConfig& cfg) {
    return kv.can_allocate_request(r.prompt_tokens, cfg.reserve_decode_tokens,
                                   cfg.kv_watermark_frac);
}

void admit(SchedulerState& st, KvCacheState& kv, const Request& r, const ReplicaConfig& cfg) {
    kv.admit(r.id, static_cast<std::int64_t>(r.prompt_tokens) + cfg.reserve_decode_tokens);
    st.wait_queue.pop_front();
    st.running.push_back(r.id);
}

void append_ready_decodes(Batch& b, const SchedulerState& st, const std::vector<Request>& reqs,
                          const InFlightSet& in_flight) {
    for (int id : st.running) {
        const Request& r = reqs[id];
        if (r.state == RequestState::Decoding && ready(r, in_flight))
            b.entries.push_back(make_decode_entry(r));
    }
}

}  // namespace

void SchedulerState::remove_running(int id) {
    running.erase(std::remove(running.begin(), running.end(), id), running.end());
}

Batch request_level_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                               const ReplicaConfig& cfg, const InFlightSet& in_flight) {
    Batch b;
    if (!st.running.empty()) {
        append_ready_decodes(b, st, reqs, in_flight);
        return b;
    }
    while (!st.wait_queue.empty()) {
        const Request& r = reqs[st.wait_queue.front()];
        if (static_cast<int>(st.running.size()) >= cfg.max_batch_size) break;
        if (!kv_admissible(kv, r, cfg)) break;
        admit(st, kv, r, cfg);
        b.entries.push_back(make_chunk_entry(r, r.prompt_tokens));
    }
    return b;
}

Batch vllm_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                      const ReplicaConfig& cfg, const InFlightSet& in_flight) {
    Batch b;
    std::int64_t batched_prompt_tokens = 0;
    while (!st.wait_queue.empty()) {
        const Request& r = reqs[st.wait_queue.front()];
        if (static_cast<int>(st.running.size()) >= cfg.max_batch_size) break;
        if (!kv_admissible(kv, r, cfg)) break;
        if (batched_prompt_tokens + r.prompt_tokens > cfg.max_num_batched_tokens) {
            if (b.entries.empty() && r.prompt_tokens > cfg.max_num_batched_tokens) {
                // The cap yields to a single oversized prompt.
                admit(st, kv, r, cfg);
                b.entries.push_back(make_chunk_entry(r, r.prompt_tokens));
            }
            break;
        }
        admit(st, kv, r, cfg);
        batched_prompt_tokens += r.prompt_tokens;
        b.entries.push_back(make_chunk_entry(r, r.prompt_tokens));
    }
    if (!b.entries.empty()) return b;  // prefill-only batch

    append_ready_decodes(b, st, reqs, in_flight);
    return b;
}

Batch orca_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                      const ReplicaConfig& cfg, const InFlightSet& in_flight) {
    Batch b;
    append_ready_decodes(b, st, reqs, in_flight);
    while (!st.wait_queue.empty()) {
        const Request& r = reqs[st.wait_queue.front()];
        if (static_cast<int>(st.running.size()) >= cfg.orca_cap()) break;
        if (!kv_admissible(kv, r, cfg)) break;
        admit(st, kv, r, cfg);
        b.entries.push_back(make_chunk_entry(r, r.prompt_tokens));
    }
    return b;
}

int get_next_chunk_size(const Request& r, int token_budget, int packed_tokens, int chunk_align) {
    const int room = token_budget - packed_tokens;
    if (room <= 0) return 0;
    const int rem = r.prefill_remaining();
    if (rem <= room) return rem;  // final chunk, no alignment needed
    return (room / chunk_align) * chunk_align;
}

Batch stall_free_next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                            const ReplicaConfig& cfg, const InFlightSet& in_flight) {
    Batch b;
    int n_t = 0;

    append_ready_decodes(b, st, reqs, in_flight);
    n_t = static_cast<int>(b.entries.size());

    // Without coalescing, a batch is either all decodes or all chunks.
    if (!cfg.hybrid_batching && n_t > 0) return b;

    for (int id : st.running) {
        const Request& r = reqs[id];
        if (r.prefill_complete() || !ready(r, in_flight)) continue;
        const int c = get_next_chunk_size(r, cfg.token_budget, n_t, cfg.chunk_align);
        if (c > 0) {
            b.entries.push_back(make_chunk_entry(r, c));
            n_t += c;
        }
    }

    while (!st.wait_queue.empty() && n_t < cfg.token_budget) {
        const Request& r = reqs[st.wait_queue.front()];
        if (static_cast<int>(st.running.size()) >= cfg.max_batch_size) break;
        if (!kv_admissible(kv, r, cfg)) break;
        const int c = get_next_chunk_size(r, cfg.token_budget, n_t, cfg.chunk_align);
        if (c == 0) break;
        admit(st, kv, r, cfg);
        b.entries.push_back(make_chunk_entry(r, c));
        n_t += c;
    }
    return b;
}

Batch next_batch(SchedulerState& st, std::vector<Request>& reqs, KvCacheState& kv,
                 const ReplicaConfig& cfg, const InFlightSet& in_flight) {
    switch (cfg.scheduler) {
        case SchedulerPolicy::RequestLevel:
            return request_level_next_batch(st, reqs, kv, cfg, in_flight);
        case SchedulerPolicy::VllmEager:
            return vllm_next_batch(st, reqs, kv, cfg, in_flight);
        case SchedulerPolicy::OrcaHybrid:
            return orca_next_batch(st, reqs, kv, cfg, in_flight);
        case SchedulerPolicy::StallFree:
            return stall_free_next_batch(st, reqs, kv, cfg, in_flight);
    }
    throw ContractViolation("unknown scheduler policy");
}

int compute_token_budget(double t_max_ms, const CostModelParams& params, int pp_degree,
                         const TokenBudgetSpec& spec) {
    const double factor = spec.pipeline_factor_override > 0.0 ? spec.pipeline_factor_override
                                                              : static_cast<double>(pp_degree);
    int best = 0;
    for (int tau = spec.chunk_align; tau <= spec.max_budget; tau += spec.chunk_align) {
        const int chunk = tau - spec.rep_decode_count;
        if (chunk < 1) continue;
        Batch hybrid = make_decode_batch(spec.rep_decode_count, spec.rep_decode_kv);
        BatchEntry e;
        e.request_id = spec.rep_decode_count;
        e.kind = EntryKind::PrefillChunk;
        e.chunk_tokens = chunk;
        e.prefix_tokens = 0;
        hybrid.entries.push_back(e);
        if (iteration_time(hybrid, params) * factor <= t_max_ms) best = tau;
    }
    if (best == 0)
        throw InfeasibleSlo("no token budget satisfies TBT target of " +
                            std::to_string(t_max_ms) + " ms");
    return best;
}

}  // namespace servesim
