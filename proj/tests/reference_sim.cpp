// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "reference_sim.hpp"

#include <algorithm>

#include "servesim/kvcache.hpp"
#include "servesim/sched.hpp"

namespace servesim {

namespace {

struct RefLogger {
    std::vector<SimEvent>& events;
    std::int64_t seq = 0;

    void log(EventKind kind, TimeUs t, int r = -1, int mb = -1, int stage = -1, int tok = -1) {
        SimEvent e;
        e.time = t;
        e.seq = seq++;
        e.kind = kind;
        e.request_id = r;
        e.microbatch_id = mb;
        e.stage = stage;
        e.token_index = tok;
        events.push_back(e);
    }
};

}  // namespace

SimReport reference_simulate(const ReplicaConfig& cfg, const CostModelParams& params,
                             const std::vector<Request>& trace) {
    if (cfg.pp_degree != 1)
        throw ContractViolation("reference simulator is single-stage (pp_degree must be 1)");
    cfg.validate();
    params.validate();

    SimReport report;
    RefLogger logger{report.events};

    std::vector<Request> reqs = trace;
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        reqs[i].id = static_cast<int>(i);
        if (reqs[i].prompt_tokens < 1 || reqs[i].output_tokens < 1)
            throw ContractViolation("trace rows need prompt_tokens >= 1 and output_tokens >= 1");
    }
    report.first_sched_time.assign(reqs.size(), -1);
    report.stage_busy_us.assign(1, 0);
    report.kv_total_blocks = cfg.kv_blocks;

    SchedulerState sched;
    KvCacheState kv(cfg.kv_blocks, cfg.kv_block_size);
    const InFlightSet no_in_flight;

    std::size_t next_arrival = 0;
    std::size_t finished = 0;
    TimeUs now = 0;

    auto ingest_upto = [&](TimeUs t, bool inclusive) {
        while (next_arrival < reqs.size() &&
               (reqs[next_arrival].arrival_time < t ||
                (inclusive && reqs[next_arrival].arrival_time == t))) {
            sched.wait_queue.push_back(reqs[next_arrival].id);
            logger.log(EventKind::Arrival, reqs[next_arrival].arrival_time,
                       reqs[next_arrival].id);
            ++next_arrival;
        }
    };

    auto form = [&]() { return next_batch(sched, reqs, kv, cfg, no_in_flight); };

    while (finished < reqs.size()) {
        Batch batch = form();
        if (batch.empty() && next_arrival < reqs.size()) {
            // Idle: jump to the next arrival; same-tick arrivals become
            // visible together and trigger the next formation.
            now = std::max(now, reqs[next_arrival].arrival_time);
            ingest_upto(now, true);
            batch = form();
        }
        if (batch.empty()) {
            if (finished < reqs.size() && next_arrival >= reqs.size())
                throw OutOfKvBlocks("reference simulation stalled: request can never be admitted");
            continue;
        }

        const int mb_id = static_cast<int>(report.num_microbatches);
        for (const auto& e : batch.entries) {
            const Request& r = reqs[e.request_id];
            if (report.first_sched_time[e.request_id] < 0)
                report.first_sched_time[e.request_id] = now;
            if (e.kind == EntryKind::PrefillChunk)
                kv.grow(e.request_id, e.prefix_tokens + e.chunk_tokens);
            else
                kv.grow(e.request_id, static_cast<std::int64_t>(r.prompt_tokens) + r.decodes_done);
        }

        const double iter_ms = iteration_time(batch, params, cfg.tp_degree, cfg.pp_degree);
        const TimeUs dur = std::max<TimeUs>(1, ms_to_us(iter_ms));
        const TimeUs end = now + dur;

        logger.log(EventKind::BatchStart, now, -1, mb_id);
        logger.log(EventKind::StageStart, now, -1, mb_id, 0);
        logger.log(EventKind::StageEnd, end, -1, mb_id, 0);

        MicrobatchRecord rec;
        rec.id = mb_id;
        rec.issue = now;
        rec.stage_us = dur;
        rec.exit = end;
        rec.iteration_ms = iter_ms;
        rec.entries = batch.entries;
        rec.summary.prefill_tokens = batch.prefill_tokens();
        rec.summary.decode_kv = batch.decode_kv_tokens();
        rec.total_tokens = batch.total_tokens();
        report.microbatches.push_back(rec);
        report.kv_series.push_back(KvSample{now, kv.allocated_total(), kv.committed_total()});
        report.num_microbatches++;
        report.stage_busy_us[0] += dur;

        // Completions, then arrivals strictly inside the iteration window.
        now = end;
        for (const auto& e : batch.entries) {
            Request& r = reqs[e.request_id];
            const std::size_t emits_before = r.token_emit_times.size();
            apply_iteration_result(r, e, now);
            if (r.token_emit_times.size() > emits_before) {
                report.total_output_tokens++;
                logger.log(EventKind::TokenEmit, now, r.id, mb_id, -1,
                           static_cast<int>(r.token_emit_times.size()) - 1);
            }
            if (r.finished()) {
                kv.release(r.id);
                sched.remove_running(r.id);
                finished++;
                logger.log(EventKind::RequestFinish, now, r.id, mb_id);
            }
        }
        ingest_upto(now, false);
    }

    report.requests = std::move(reqs);
    report.makespan = now;
    std::stable_sort(report.events.begin(), report.events.end(),
                     [](const SimEvent& a, const SimEvent& b) {
                         if (a.time != b.time) return a.time < b.time;
                         return a.seq < b.seq;
                     });
    return report;
}

}  // namespace servesim
