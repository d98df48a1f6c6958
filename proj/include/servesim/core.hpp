// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace servesim {

// All times are integer microseconds internally; reports use milliseconds.
using TimeUs = std::int64_t;

inline constexpr double us_to_ms(TimeUs t) { return static_cast<double>(t) / 1000.0; }
TimeUs ms_to_us(double ms);

struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct OutOfKvBlocks : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleSlo : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Request lifecycle
// ============================================================================

enum class RequestState { Queued, Prefilling, Decoding, Finished };

const char* to_string(RequestState s);

/// One inference job: timing, token counts and phase progress. Token content
/// is out of scope; only counts and emission times are tracked.
struct Request {
    int id = -1;
    TimeUs arrival_time = 0;
    int prompt_tokens = 0;
    int output_tokens = 0;

    int prefill_done = 0;
    int decodes_done = 0;
    std::optional<TimeUs> first_token_time;
    std::vector<TimeUs> token_emit_times;
    RequestState state = RequestState::Queued;

    Request() = default;
    Request(int id_, TimeUs arrival, int prompt, int output)
        : id(id_), arrival_time(arrival), prompt_tokens(prompt), output_tokens(output) {}

    int prefill_remaining() const { return prompt_tokens - prefill_done; }
    bool prefill_complete() const { return prefill_done == prompt_tokens; }
    // Tokens resident in the KV cache (processed prompt + generated tokens).
    std::int64_t kv_tokens() const { return static_cast<std::int64_t>(prefill_done) + decodes_done; }
    bool finished() const { return state == RequestState::Finished; }
};

// ============================================================================
// Batches
// ============================================================================

enum class EntryKind { Decode, PrefillChunk };

/// One request's slice of an iteration. For Decode entries chunk_tokens is 1
/// and prefix_tokens is the KV context length the token attends over. For
/// PrefillChunk entries prefix_tokens counts this request's tokens already in
/// the cache before the iteration.
struct BatchEntry {
    int request_id = -1;
    EntryKind kind = EntryKind::Decode;
    int chunk_tokens = 1;
    std::int64_t prefix_tokens = 0;
};

BatchEntry make_decode_entry(const Request& r);
BatchEntry make_chunk_entry(const Request& r, int chunk_tokens);

struct Batch {
    std::vector<BatchEntry> entries;

    bool empty() const { return entries.empty(); }
    std::int64_t total_tokens() const;
    std::int64_t prefill_tokens() const;
    std::int64_t decode_tokens() const;
    // Total KV context attended over by decode entries; drives PB3 variance.
    std::int64_t decode_kv_tokens() const;
    bool decode_only() const { return prefill_tokens() == 0 && !empty(); }
};

// ============================================================================
// Replica configuration
// ============================================================================

enum class SchedulerPolicy { RequestLevel, VllmEager, OrcaHybrid, StallFree };

const char* to_string(SchedulerPolicy p);
std::optional<SchedulerPolicy> scheduler_from_string(const std::string& name);
std::vector<std::string> scheduler_names();

struct ReplicaConfig {
    SchedulerPolicy scheduler = SchedulerPolicy::StallFree;
    int token_budget = 512;              // tau; stall-free batching only
    int max_batch_size = 512;
    int max_num_batched_tokens = 4096;   // vLLM-style prefill token cap
    int max_batch_size_orca = 0;         // 0 -> max_batch_size / 4
    int tp_degree = 1;
    int pp_degree = 1;
    std::int64_t kv_blocks = 131072;
    int kv_block_size = 16;
    int tile_size = 256;
    int chunk_align = 32;
    int reserve_decode_tokens = 0;
    double kv_watermark_frac = 0.10;
    double pipeline_tbt_factor = 0.0;    // 0 -> pp_degree
    bool hybrid_batching = true;         // false: stall-free without coalescing

    int orca_cap() const { return max_batch_size_orca > 0 ? max_batch_size_orca : max_batch_size / 4; }
    double tbt_factor() const { return pipeline_tbt_factor > 0.0 ? pipeline_tbt_factor : static_cast<double>(pp_degree); }
    void validate() const;
};

// ============================================================================
// Lifecycle operation
// ============================================================================

/// Applies the outcome of one iteration to a request. A PrefillChunk advances
/// prefill_done; completing the prompt emits the first output token at
/// completion_time (decode count starts at 1). A Decode appends one emission
/// and finishes the request once all output tokens are out.
void apply_iteration_result(Request& request, const BatchEntry& entry, TimeUs completion_time);

}  // namespace servesim
