// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/core.hpp"

#include <cmath>

namespace servesim {

TimeUs ms_to_us(double ms) { return static_cast<TimeUs>(std::llround(ms * 1000.0)); }

const char* to_string(RequestState s) {
    switch (s) {
        case RequestState::Queued: return "queued";
        case RequestState::Prefilling: return "prefilling";
        case RequestState::Decoding: return "decoding";
        case RequestState::Finished: return "finished";
    }
    return "unknown";
}

const char* to_string(SchedulerPolicy p) {
    switch (p) {
        case SchedulerPolicy::RequestLevel: return "request_level";
        case SchedulerPolicy::VllmEager: return "vllm";
        case SchedulerPolicy::OrcaHybrid: return "orca";
        case SchedulerPolicy::StallFree: return "stall_free";
    }
    return "unknown";
}

std::optional<SchedulerPolicy> scheduler_from_string(const std::string& name) {
    if (name == "request_level") return SchedulerPolicy::RequestLevel;
    if (name == "vllm") return SchedulerPolicy::VllmEager;
    if (name == "orca") return SchedulerPolicy::OrcaHybrid;
    if (name == "stall_free") return SchedulerPolicy::StallFree;
    return std::nullopt;
}

std::vector<std::string> scheduler_names() {
    return {"request_level", "vllm", "orca", "stall_free"};
}

BatchEntry make_decode_entry(const Request& r) {
    if (!r.prefill_complete() || r.state != RequestState::Decoding)
        throw ContractViolation("decode entry for request not in decoding state");
    BatchEntry e;
    e.request_id = r.id;
    e.kind = EntryKind::Decode;
    e.chunk_tokens = 1;
    // Context the new token attends over: prompt plus previously emitted tokens.
    e.prefix_tokens = static_cast<std::int64_t>(r.prompt_tokens) + r.decodes_done - 1;
    return e;
}

BatchEntry make_chunk_entry(const Request& r, int chunk_tokens) {
    if (chunk_tokens < 1 || chunk_tokens > r.prefill_remaining())
        throw ContractViolation("prefill chunk size out of range");
    BatchEntry e;
    e.request_id = r.id;
    e.kind = EntryKind::PrefillChunk;
    e.chunk_tokens = chunk_tokens;
    e.prefix_tokens = r.prefill_done;
    return e;
}

std::int64_t Batch::total_tokens() const {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.chunk_tokens;
    return n;
}

std::int64_t Batch::prefill_tokens() const {
    std::int64_t n = 0;
    for (const auto& e : entries)
        if (e.kind == EntryKind::PrefillChunk) n += e.chunk_tokens;
    return n;
}

std::int64_t Batch::decode_tokens() const {
    std::int64_t n = 0;
    for (const auto& e : entries)
        if (e.kind == EntryKind::Decode) n += e.chunk_tokens;
    return n;
}

std::int64_t Batch::decode_kv_tokens() const {
    std::int64_t n = 0;
    for (const auto& e : entries)
        if (e.kind == EntryKind::Decode) n += e.prefix_tokens;
    return n;
}

void ReplicaConfig::validate() const {
    if (pp_degree < 1 || tp_degree < 1) throw ContractViolation("parallel degrees must be >= 1");
    if (kv_block_size < 1) throw ContractViolation("kv_block_size must be >= 1");
    if (scheduler == SchedulerPolicy::StallFree && token_budget < tile_size)
        throw ContractViolation("token_budget must be >= tile_size");
    if (chunk_align < 1) throw ContractViolation("chunk_align must be >= 1");
    if (max_batch_size < 1) throw ContractViolation("max_batch_size must be >= 1");
    if (kv_watermark_frac < 0.0 || kv_watermark_frac >= 1.0)
        throw ContractViolation("kv_watermark_frac must be in [0, 1)");
}

void apply_iteration_result(Request& request, const BatchEntry& entry, TimeUs completion_time) {
    if (entry.request_id != request.id)
        throw ContractViolation("batch entry does not belong to this request");

    if (entry.kind == EntryKind::PrefillChunk) {
        if (request.state == RequestState::Decoding || request.state == RequestState::Finished)
            throw ContractViolation("prefill chunk applied after prefill completed");
        if (entry.chunk_tokens < 1 || entry.chunk_tokens > request.prefill_remaining())
            throw ContractViolation("prefill chunk exceeds remaining prompt");
        request.prefill_done += entry.chunk_tokens;
        if (request.prefill_complete()) {
            // Completing the prompt produces the first output token.
            request.first_token_time = completion_time;
            request.token_emit_times.push_back(completion_time);
            request.decodes_done = 1;
            request.state = request.output_tokens == 1 ? RequestState::Finished
                                                       : RequestState::Decoding;
        } else {
            request.state = RequestState::Prefilling;
        }
        return;
    }

    // Decode
    if (request.state != RequestState::Decoding || !request.prefill_complete())
        throw ContractViolation("decode entry while prefill incomplete or request not decoding");
    if (!request.token_emit_times.empty() && completion_time <= request.token_emit_times.back())
        throw ContractViolation("token emission times must be strictly increasing");
    request.decodes_done += 1;
    request.token_emit_times.push_back(completion_time);
    if (request.decodes_done == request.output_tokens) request.state = RequestState::Finished;
}

}  // namespace servesim
