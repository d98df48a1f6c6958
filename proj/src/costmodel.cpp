// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/costmodel.hpp"

#include <algorithm>
#include <cmath>

namespace servesim {

void CostModelParams::validate() const {
    if (per_token_linear_ms < 0 || attn_prefill_quad_ms < 0 || attn_kv_read_ms < 0 ||
        attn_decode_per_kv_ms < 0 || fixed_overhead_ms < 0 || tp_comm_ms < 0 || pp_send_ms < 0)
        throw ContractViolation("timing constants must be non-negative");
    if (saturation_tokens < 1) throw ContractViolation("saturation_tokens must be >= 1");
    if (tile_size < 1) throw ContractViolation("tile_size must be >= 1");
    if (tile_penalty_frac < 0) throw ContractViolation("tile_penalty_frac must be >= 0");
}

double linear_time(std::int64_t tokens, const CostModelParams& p) {
    if (tokens <= 0) return 0.0;
    return std::max(p.mem_floor_ms(), p.per_token_linear_ms * static_cast<double>(tokens));
}

double tile_penalty(std::int64_t tokens, const CostModelParams& p) {
    if (tokens <= 0 || p.tile_size <= 1) return 1.0;
    return tokens % p.tile_size == 0 ? 1.0 : 1.0 + p.tile_penalty_frac;
}

double attn_prefill_chunk_time(std::int64_t chunk, std::int64_t prefix, const CostModelParams& p) {
    const double c = static_cast<double>(chunk);
    return p.attn_prefill_quad_ms * c * c + p.attn_kv_read_ms * c * static_cast<double>(prefix);
}

double attn_decode_time(const std::vector<std::int64_t>& kv_lengths, const CostModelParams& p) {
    std::int64_t total = 0;
    for (auto kv : kv_lengths) total += kv;
    return p.attn_decode_per_kv_ms * static_cast<double>(total);
}

double iteration_time(const Batch& batch, const CostModelParams& p, int tp_degree, int pp_degree) {
    if (batch.empty()) return 0.0;
    const std::int64_t tokens = batch.total_tokens();

    const double compute = p.per_token_linear_ms * static_cast<double>(tokens) * tile_penalty(tokens, p);
    const double linear = std::max(p.mem_floor_ms(), compute) / static_cast<double>(tp_degree);

    double attn = 0.0;
    for (const auto& e : batch.entries) {
        if (e.kind == EntryKind::PrefillChunk)
            attn += attn_prefill_chunk_time(e.chunk_tokens, e.prefix_tokens, p);
        else
            attn += p.attn_decode_per_kv_ms * static_cast<double>(e.prefix_tokens);
    }

    const double total = p.fixed_overhead_ms + linear + attn + p.tp_comm_ms;
    return total / static_cast<double>(pp_degree);
}

Batch make_decode_batch(int batch_size, std::int64_t kv_per_request) {
    Batch b;
    b.entries.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i) {
        BatchEntry e;
        e.request_id = i;
        e.kind = EntryKind::Decode;
        e.chunk_tokens = 1;
        e.prefix_tokens = kv_per_request;
        b.entries.push_back(e);
    }
    return b;
}

Batch make_prefill_batch(std::int64_t prompt_tokens) {
    Batch b;
    BatchEntry e;
    e.request_id = 0;
    e.kind = EntryKind::PrefillChunk;
    e.chunk_tokens = static_cast<int>(prompt_tokens);
    e.prefix_tokens = 0;
    b.entries.push_back(e);
    return b;
}

double decode_reference_time(const CostModelParams& p) {
    return iteration_time(make_decode_batch(32, 4096), p);
}

}  // namespace servesim
