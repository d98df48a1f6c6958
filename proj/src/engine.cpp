// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/engine.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

namespace servesim {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::Arrival: return "arrival";
        case EventKind::BatchStart: return "batch_start";
        case EventKind::StageStart: return "stage_start";
        case EventKind::StageEnd: return "stage_end";
        case EventKind::TokenEmit: return "token_emit";
        case EventKind::RequestFinish: return "request_finish";
        case EventKind::Bubble: return "bubble";
    }
    return "unknown";
}

const char* to_string(BubbleClass c) {
    switch (c) {
        case BubbleClass::PB1: return "PB1";
        case BubbleClass::PB2: return "PB2";
        case BubbleClass::PB3: return "PB3";
    }
    return "unknown";
}

BubbleClass classify_bubble(const MicrobatchSummary& prev, const MicrobatchSummary& next) {
    const bool pd = prev.decode_only();
    const bool nd = next.decode_only();
    if (pd != nd) return BubbleClass::PB2;
    if (!pd && prev.prefill_tokens != next.prefill_tokens) return BubbleClass::PB1;
    if (pd && prev.decode_kv != next.decode_kv) return BubbleClass::PB3;
    // Identical compositions; keep the nearest class.
    return pd ? BubbleClass::PB3 : BubbleClass::PB1;
}

PipelineState::PipelineState(int pp_degree, TimeUs send_us)
    : send_us_(send_us),
      busy_until_(pp_degree, 0),
      busy_(pp_degree, 0),
      last_(pp_degree) {
    if (pp_degree < 1) throw ContractViolation("pp_degree must be >= 1");
}

PipelineState::Issue PipelineState::advance(TimeUs issue_us, TimeUs stage_us,
                                            const MicrobatchSummary& summary) {
    if (issue_us < busy_until_[0]) throw ContractViolation("first stage still busy at issue time");
    Issue out;
    const int pp = stages();
    out.stage_start.resize(pp);
    out.stage_end.resize(pp);

    out.stage_start[0] = issue_us;
    out.stage_end[0] = issue_us + stage_us;
    for (int s = 1; s < pp; ++s) {
        const TimeUs avail = out.stage_end[s - 1] + send_us_;
        // Idle while waiting on the upstream stage counts as a bubble only if
        // this micro-batch overlapped the stage's previous work (fill and
        // post-drain restarts are not bubbles). The hop latency applies to
        // every micro-batch alike and is excluded from the mismatch idle.
        if (last_[s].exists && issue_us <= last_[s].end && out.stage_end[s - 1] > last_[s].end) {
            out.bubbles.push_back(BubbleRecord{s, last_[s].end, out.stage_end[s - 1],
                                               classify_bubble(last_[s].summary, summary)});
        }
        out.stage_start[s] = std::max(avail, busy_until_[s]);
        out.stage_end[s] = out.stage_start[s] + stage_us;
    }
    for (int s = 0; s < pp; ++s) {
        busy_until_[s] = out.stage_end[s];
        busy_[s] += stage_us;
        last_[s].exists = true;
        last_[s].end = out.stage_end[s];
        last_[s].summary = summary;
    }
    return out;
}

namespace {

// Heap ordering at equal times: micro-batch exits first, then the
// first-stage-free wakeup, then arrivals. A batch forming at tick t therefore
// never sees a tick-t arrival unless the arrival itself triggered it.
enum EvRank : int { kExit = 0, kS1Free = 1, kArrival = 2 };

struct PendingEvent {
    TimeUs t;
    int rank;
    std::int64_t seq;
    int payload;  // microbatch id (kExit) or request id (kArrival)
};

struct PendingCmp {
    bool operator()(const PendingEvent& a, const PendingEvent& b) const {
        if (a.t != b.t) return a.t > b.t;
        if (a.rank != b.rank) return a.rank > b.rank;
        return a.seq > b.seq;
    }
};

struct MbInternal {
    std::vector<BatchEntry> entries;
    MicrobatchSummary summary;
    TimeUs exit = 0;
};

class Engine {
public:
    Engine(const ReplicaConfig& cfg, const CostModelParams& params,
           const std::vector<Request>& trace, const SimOptions& opts)
        : cfg_(cfg), params_(params), opts_(opts),
          pipeline_(cfg.pp_degree, ms_to_us(params.pp_send_ms)),
          kv_(cfg.kv_blocks, cfg.kv_block_size) {
        cfg_.validate();
        params_.validate();
        requests_ = trace;
        for (std::size_t i = 0; i < requests_.size(); ++i) {
            Request& r = requests_[i];
            r.id = static_cast<int>(i);
            if (r.prompt_tokens < 1 || r.output_tokens < 1)
                throw ContractViolation("trace rows need prompt_tokens >= 1 and output_tokens >= 1");
            if (i > 0 && r.arrival_time < requests_[i - 1].arrival_time)
                throw ContractViolation("trace must be sorted by arrival time");
        }
        report_.first_sched_time.assign(requests_.size(), -1);
    }

    SimReport run() {
        for (const auto& r : requests_)
            push(PendingEvent{r.arrival_time, kArrival, next_seq_++, r.id});

        while (!heap_.empty()) {
            const PendingEvent ev = pop();
            now_ = ev.t;
            switch (ev.rank) {
                case kExit: handle_exit(ev.payload); break;
                case kS1Free: break;  // wakeup only
                case kArrival: handle_arrivals(ev); break;
            }
            if (now_ >= pipeline_.first_stage_free()) try_issue();
        }

        if (finished_ != static_cast<std::int64_t>(requests_.size()))
            throw OutOfKvBlocks(
                "simulation stalled at t=" + std::to_string(us_to_ms(now_)) +
                " ms: a queued request can never be admitted (KV capacity too small?)");

        finalize_report();
        return std::move(report_);
    }

private:
    void push(PendingEvent e) { heap_.push(e); }
    PendingEvent pop() {
        const PendingEvent e = heap_.top();
        heap_.pop();
        return e;
    }

    void log(EventKind kind, TimeUs t, int r = -1, int mb = -1, int stage = -1, int tok = -1) {
        if (!opts_.keep_events) return;
        SimEvent e;
        e.time = t;
        e.seq = log_seq_++;
        e.kind = kind;
        e.request_id = r;
        e.microbatch_id = mb;
        e.stage = stage;
        e.token_index = tok;
        report_.events.push_back(e);
    }

    void log_bubble(const BubbleRecord& b) {
        report_.bubbles.push_back(b);
        if (!opts_.keep_events) return;
        SimEvent e;
        e.time = b.start;
        e.seq = log_seq_++;
        e.kind = EventKind::Bubble;
        e.stage = b.stage;
        e.bubble_start = b.start;
        e.bubble_end = b.end;
        e.bubble_class = b.cls;
        report_.events.push_back(e);
    }

    void handle_arrivals(const PendingEvent& first) {
        sched_.wait_queue.push_back(first.payload);
        log(EventKind::Arrival, now_, first.payload);
        // Simultaneous arrivals become visible together.
        while (!heap_.empty() && heap_.top().t == now_ && heap_.top().rank == kArrival) {
            const PendingEvent e = pop();
            sched_.wait_queue.push_back(e.payload);
            log(EventKind::Arrival, now_, e.payload);
        }
    }

    void try_issue() {
        Batch batch = next_batch(sched_, requests_, kv_, cfg_, in_flight_);
        if (batch.empty()) return;

        const int mb_id = static_cast<int>(mbs_.size());
        for (const auto& e : batch.entries) {
            const Request& r = requests_[e.request_id];
            if (report_.first_sched_time[e.request_id] < 0)
                report_.first_sched_time[e.request_id] = now_;
            try {
                if (e.kind == EntryKind::PrefillChunk)
                    kv_.grow(e.request_id, e.prefix_tokens + e.chunk_tokens);
                else
                    kv_.grow(e.request_id, static_cast<std::int64_t>(r.prompt_tokens) + r.decodes_done);
            } catch (const OutOfKvBlocks& ex) {
                throw OutOfKvBlocks(std::string(ex.what()) + " at t=" +
                                    std::to_string(us_to_ms(now_)) + " ms");
            }
            in_flight_.insert(e.request_id);
        }

        MicrobatchSummary summary;
        summary.prefill_tokens = batch.prefill_tokens();
        summary.decode_kv = batch.decode_kv_tokens();

        const double iter_ms = iteration_time(batch, params_, cfg_.tp_degree, cfg_.pp_degree);
        const TimeUs stage_us = std::max<TimeUs>(1, ms_to_us(iter_ms));
        const auto issue = pipeline_.advance(now_, stage_us, summary);
        for (const auto& b : issue.bubbles) log_bubble(b);

        log(EventKind::BatchStart, now_, -1, mb_id);
        for (int s = 0; s < cfg_.pp_degree; ++s) {
            log(EventKind::StageStart, issue.stage_start[s], -1, mb_id, s);
            log(EventKind::StageEnd, issue.stage_end[s], -1, mb_id, s);
        }

        MbInternal mb;
        mb.entries = std::move(batch.entries);
        mb.summary = summary;
        mb.exit = issue.stage_end.back();
        if (opts_.keep_microbatches) {
            MicrobatchRecord rec;
            rec.id = mb_id;
            rec.issue = now_;
            rec.stage_us = stage_us;
            rec.exit = mb.exit;
            rec.iteration_ms = iter_ms * cfg_.pp_degree;
            rec.entries = mb.entries;
            rec.summary = summary;
            rec.total_tokens = summary.prefill_tokens +
                               static_cast<std::int64_t>(std::count_if(
                                   mb.entries.begin(), mb.entries.end(),
                                   [](const BatchEntry& e) { return e.kind == EntryKind::Decode; }));
            report_.microbatches.push_back(std::move(rec));
        }
        if (opts_.keep_kv_series)
            report_.kv_series.push_back(KvSample{now_, kv_.allocated_total(), kv_.committed_total()});

        push(PendingEvent{issue.stage_end[0], kS1Free, next_seq_++, 0});
        push(PendingEvent{mb.exit, kExit, next_seq_++, mb_id});
        mbs_.push_back(std::move(mb));
        report_.num_microbatches++;

        if (opts_.keep_events &&
            static_cast<std::int64_t>(report_.events.size()) > opts_.max_events)
            throw ContractViolation("event budget exceeded; runaway configuration");
    }

    void handle_exit(int mb_id) {
        MbInternal& mb = mbs_[mb_id];
        for (const auto& e : mb.entries) {
            Request& r = requests_[e.request_id];
            const std::size_t emits_before = r.token_emit_times.size();
            apply_iteration_result(r, e, now_);
            in_flight_.erase(e.request_id);
            if (r.token_emit_times.size() > emits_before) {
                report_.total_output_tokens++;
                log(EventKind::TokenEmit, now_, r.id, mb_id, -1,
                    static_cast<int>(r.token_emit_times.size()) - 1);
            }
            if (r.finished()) {
                kv_.release(r.id);
                sched_.remove_running(r.id);
                finished_++;
                log(EventKind::RequestFinish, now_, r.id, mb_id);
            }
        }
        mb.entries.clear();
        mb.entries.shrink_to_fit();
    }

    void finalize_report() {
        report_.requests = std::move(requests_);
        report_.makespan = now_;
        report_.stage_busy_us = pipeline_.busy_time();
        report_.kv_total_blocks = cfg_.kv_blocks;
        if (opts_.keep_events) {
            std::stable_sort(report_.events.begin(), report_.events.end(),
                             [](const SimEvent& a, const SimEvent& b) {
                                 if (a.time != b.time) return a.time < b.time;
                                 return a.seq < b.seq;
                             });
        }
    }

    ReplicaConfig cfg_;
    CostModelParams params_;
    SimOptions opts_;
    PipelineState pipeline_;
    KvCacheState kv_;
    std::vector<Request> requests_;
    SchedulerState sched_;
    InFlightSet in_flight_;
    std::vector<MbInternal> mbs_;
    std::priority_queue<PendingEvent, std::vector<PendingEvent>, PendingCmp> heap_;
    SimReport report_;
    TimeUs now_ = 0;
    std::int64_t next_seq_ = 0;
    std::int64_t log_seq_ = 0;
    std::int64_t finished_ = 0;
};

}  // namespace

SimReport simulate(const ReplicaConfig& cfg, const CostModelParams& params,
                   const std::vector<Request>& trace, const SimOptions& opts) {
    Engine engine(cfg, params, trace, opts);
    return engine.run();
}

std::string SimReport::event_log_jsonl() const {
    std::ostringstream out;
    for (const auto& e : events) {
        out << "{\"t_us\":" << e.time << ",\"ev\":\"" << to_string(e.kind) << "\"";
        switch (e.kind) {
            case EventKind::Arrival:
            case EventKind::RequestFinish:
                out << ",\"r\":" << e.request_id;
                break;
            case EventKind::TokenEmit:
                out << ",\"r\":" << e.request_id << ",\"index\":" << e.token_index;
                break;
            case EventKind::BatchStart: {
                out << ",\"mb\":" << e.microbatch_id << ",\"entries\":[";
                const auto& mb = microbatches[e.microbatch_id];
                for (std::size_t i = 0; i < mb.entries.size(); ++i) {
                    const auto& be = mb.entries[i];
                    if (i) out << ",";
                    out << "{\"r\":" << be.request_id << ",\"kind\":\""
                        << (be.kind == EntryKind::Decode ? "decode" : "prefill")
                        << "\",\"tokens\":" << be.chunk_tokens
                        << ",\"prefix\":" << be.prefix_tokens << "}";
                }
                out << "]";
                break;
            }
            case EventKind::StageStart:
            case EventKind::StageEnd:
                out << ",\"mb\":" << e.microbatch_id << ",\"stage\":" << e.stage;
                break;
            case EventKind::Bubble:
                out << ",\"stage\":" << e.stage << ",\"start_us\":" << e.bubble_start
                    << ",\"end_us\":" << e.bubble_end << ",\"class\":\""
                    << to_string(e.bubble_class) << "\"";
                break;
        }
        out << "}\n";
    }
    return out.str();
}

}  // namespace servesim
