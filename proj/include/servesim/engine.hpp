// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "servesim/core.hpp"
#include "servesim/costmodel.hpp"
#include "servesim/sched.hpp"

namespace servesim {

enum class EventKind { Arrival, BatchStart, StageStart, StageEnd, TokenEmit, RequestFinish, Bubble };
enum class BubbleClass { PB1, PB2, PB3 };

const char* to_string(EventKind k);
const char* to_string(BubbleClass c);

struct SimEvent {
    TimeUs time = 0;
    std::int64_t seq = 0;  // deterministic tiebreak, assigned in generation order
    EventKind kind = EventKind::Arrival;
    int request_id = -1;
    int microbatch_id = -1;
    int stage = -1;
    int token_index = -1;
    TimeUs bubble_start = 0;
    TimeUs bubble_end = 0;
    BubbleClass bubble_class = BubbleClass::PB1;
};

struct BubbleRecord {
    int stage = 0;
    TimeUs start = 0;
    TimeUs end = 0;
    BubbleClass cls = BubbleClass::PB1;
};

/// Composition summary of one micro-batch, as needed for bubble classification.
struct MicrobatchSummary {
    std::int64_t prefill_tokens = 0;
    std::int64_t decode_kv = 0;
    bool decode_only() const { return prefill_tokens == 0; }
};

/// PB1: both neighbours carry prefill tokens but different counts. PB2: a
/// prefill-carrying micro-batch next to a decode-only one. PB3: both
/// decode-only with differing attention (KV) cost. Ties resolve PB2 > PB1 > PB3.
BubbleClass classify_bubble(const MicrobatchSummary& prev, const MicrobatchSummary& next);

/// In-order pipeline occupancy tracker. A micro-batch holds each stage for
/// stage_us, hops after send_us, and may not overtake its predecessor. Idle
/// gaps on a stage between two overlapping micro-batches are returned as
/// bubbles; initial fill and restarts after a drain are not bubbles.
class PipelineState {
public:
    PipelineState(int pp_degree, TimeUs send_us);

    struct Issue {
        std::vector<TimeUs> stage_start;
        std::vector<TimeUs> stage_end;
        std::vector<BubbleRecord> bubbles;
    };
    Issue advance(TimeUs issue_us, TimeUs stage_us, const MicrobatchSummary& summary);

    TimeUs first_stage_free() const { return busy_until_[0]; }
    int stages() const { return static_cast<int>(busy_until_.size()); }
    const std::vector<TimeUs>& busy_time() const { return busy_; }

private:
    struct LastMb {
        bool exists = false;
        TimeUs end = 0;
        MicrobatchSummary summary;
    };
    TimeUs send_us_;
    std::vector<TimeUs> busy_until_;
    std::vector<TimeUs> busy_;
    std::vector<LastMb> last_;
};

struct MicrobatchRecord {
    int id = -1;
    TimeUs issue = 0;
    TimeUs stage_us = 0;
    TimeUs exit = 0;
    double iteration_ms = 0.0;  // full-iteration time (all stages)
    std::vector<BatchEntry> entries;
    MicrobatchSummary summary;
    std::int64_t total_tokens = 0;
};

struct KvSample {
    TimeUs time = 0;
    std::int64_t allocated_blocks = 0;
    std::int64_t committed_blocks = 0;
};

struct SimOptions {
    bool keep_events = true;
    bool keep_microbatches = true;
    bool keep_kv_series = true;
    std::int64_t max_events = 50'000'000;
};

struct SimReport {
    std::vector<Request> requests;           // final lifecycle state
    std::vector<TimeUs> first_sched_time;    // first batch inclusion per request
    std::vector<SimEvent> events;            // empty unless keep_events
    std::vector<MicrobatchRecord> microbatches;  // empty unless keep_microbatches
    std::vector<BubbleRecord> bubbles;
    std::vector<KvSample> kv_series;
    std::vector<TimeUs> stage_busy_us;
    TimeUs makespan = 0;
    std::int64_t total_output_tokens = 0;
    std::int64_t num_microbatches = 0;
    std::int64_t kv_total_blocks = 0;

    std::string event_log_jsonl() const;
};

/// Runs the discrete-event loop to completion. Identical inputs produce an
/// identical report (and byte-identical event log). KV exhaustion and
/// never-admissible requests surface as fatal errors.
SimReport simulate(const ReplicaConfig& cfg, const CostModelParams& params,
                   const std::vector<Request>& trace, const SimOptions& opts = {});

}  // namespace servesim
