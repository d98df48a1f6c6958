// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
//
// Acceptance suite: one pass/fail line per criterion. Each criterion pins its
// tolerances in code; the binary exits nonzero if any criterion fails.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "invariant_checks.hpp"
#include "reference_sim.hpp"
#include "servesim/cli.hpp"
#include "servesim/engine.hpp"
#include "servesim/metrics.hpp"
#include "servesim/presets.hpp"
#include "servesim/sched.hpp"

using namespace servesim;
namespace fs = std::filesystem;

namespace {

#ifndef SERVESIM_SOURCE_DIR
#define SERVESIM_SOURCE_DIR "."
#endif

int g_failures = 0;

void report(int index, bool pass, const std::string& what, const std::string& detail) {
    std::printf("%s  AC%-2d %s (%s)\n", pass ? "PASS" : "FAIL", index, what.c_str(),
                detail.c_str());
    if (!pass) g_failures++;
}

SimOptions light_options() {
    SimOptions o;
    o.keep_events = false;
    o.keep_microbatches = false;
    o.keep_kv_series = false;
    return o;
}

ReplicaConfig capacity_replica(SchedulerPolicy sched) {
    ReplicaConfig cfg;
    cfg.scheduler = sched;
    cfg.token_budget = 512;
    cfg.max_batch_size = 512;
    cfg.max_num_batched_tokens = 4096;
    cfg.kv_blocks = 131072;
    cfg.kv_block_size = 16;
    cfg.kv_watermark_frac = 0.2;
    return cfg;
}

double capacity_for(SchedulerPolicy sched, const WorkloadSpec& wl, double slo_ms,
                    const CostModelParams& params, int probe_requests, std::uint64_t seed,
                    int max_batch_size = 512) {
    ReplicaConfig cfg = capacity_replica(sched);
    cfg.max_batch_size = max_batch_size;
    const ProbeFn probe = [&](double qps) {
        const auto trace = make_trace(wl, qps, probe_requests, seed);
        return summarize(simulate(cfg, params, trace, light_options()));
    };
    CapacityOptions opts;
    opts.qps_low = 0.01;
    opts.max_qps = 64;
    opts.rel_width = 0.05;
    try {
        return capacity_search(probe, slo_ms, opts).qps;
    } catch (const InfeasibleSlo&) {
        return 0.0;
    }
}

double max_tbt_ms(const Request& r) {
    double m = 0;
    for (std::size_t k = 1; k < r.token_emit_times.size(); ++k)
        m = std::max(m, us_to_ms(r.token_emit_times[k] - r.token_emit_times[k - 1]));
    return m;
}

// ---------------------------------------------------------------------------

void ac1_calibration_anchors() {
    const auto falcon = *model_preset("falcon180b");
    const double prefill = iteration_time(make_prefill_batch(4096), falcon);
    const double decode = iteration_time(make_decode_batch(32, 4096), falcon);
    char detail[128];
    std::snprintf(detail, sizeof detail, "prefill4k=%.1fms in [1035,1265], decode32@4k=%.1fms in [180,220]",
                  prefill, decode);
    report(1, prefill >= 1035 && prefill <= 1265 && decode >= 180 && decode <= 220,
           "falcon-class iteration anchors", detail);
}

void ac2_bubble_reproduction() {
    const auto falcon = *model_preset("falcon180b");
    ReplicaConfig cfg;
    cfg.scheduler = SchedulerPolicy::VllmEager;
    cfg.pp_degree = 2;
    cfg.max_num_batched_tokens = 4096;
    cfg.kv_blocks = 131072;

    std::vector<Request> trace;
    for (int i = 0; i < 32; ++i)
        trace.emplace_back(i, ms_to_us(static_cast<double>(i)), 4096, 200);
    trace.emplace_back(32, ms_to_us(30000.0), 4096, 4);

    const SimReport rep = simulate(cfg, falcon, trace, [] {
        SimOptions o;
        o.keep_events = false;
        return o;
    }());

    int pb2_in_band = 0, pb2_total = 0;
    double best = 0;
    for (const auto& b : rep.bubbles) {
        if (b.cls != BubbleClass::PB2) continue;
        pb2_total++;
        const double full_iter_ms = us_to_ms(b.end - b.start) * cfg.pp_degree;
        if (std::fabs(full_iter_ms - 950.0) <= 0.15 * 950.0) {
            pb2_in_band++;
            best = full_iter_ms;
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof detail, "PB2 bubbles: %d, in 950ms+/-15%% band: %d (%.1fms)",
                  pb2_total, pb2_in_band, best);
    report(2, pb2_total == 1 && pb2_in_band == 1, "pp=2 prefill/decode interleaving bubble",
           detail);
}

void ac3_slo_table() {
    struct Row {
        const char* model;
        double strict_s, relaxed_s;
    };
    const Row rows[] = {{"mistral7b", 0.1, 0.5},
                        {"yi34b", 0.2, 1.0},
                        {"llama70b", 1.0, 5.0},
                        {"falcon180b", 1.0, 5.0}};
    bool ok = true;
    std::string detail;
    for (const auto& row : rows) {
        const auto t = slo_thresholds(*model_preset(row.model));
        const bool row_ok = std::fabs(t.strict_ms - row.strict_s * 1000) <= 0.10 * row.strict_s * 1000 &&
                            std::fabs(t.relaxed_ms - row.relaxed_s * 1000) <= 0.10 * row.relaxed_s * 1000;
        ok = ok && row_ok;
        char buf[96];
        std::snprintf(buf, sizeof buf, "%s=%.0f/%.0fms ", row.model, t.strict_ms, t.relaxed_ms);
        detail += buf;
    }
    report(3, ok, "SLO thresholds reproduce the published table within 10%", detail);
}

void ac4_chunk_overhead() {
    const auto yi = *model_preset("yi34b");
    const double unchunked = iteration_time(make_prefill_batch(4096), yi);
    auto chunked_total = [&](int chunk) {
        double total = 0;
        std::int64_t done = 0;
        while (done < 4096) {
            const int c = static_cast<int>(std::min<std::int64_t>(chunk, 4096 - done));
            Batch b;
            BatchEntry e;
            e.request_id = 0;
            e.kind = EntryKind::PrefillChunk;
            e.chunk_tokens = c;
            e.prefix_tokens = done;
            b.entries.push_back(e);
            total += iteration_time(b, yi);
            done += c;
        }
        return total;
    };
    const double r512 = chunked_total(512) / unchunked;
    const double r2048 = chunked_total(2048) / unchunked;
    char detail[96];
    std::snprintf(detail, sizeof detail, "overhead: chunk512=%.3fx (<=1.25), chunk2048=%.3fx (<=1.05)",
                  r512, r2048);
    report(4, r512 <= 1.25 && r2048 <= 1.05, "chunked-prefill overhead on a 4096 prompt", detail);
}

void ac5_ablation_ordering() {
    const auto yi = *model_preset("yi34b");
    const auto trace = make_trace(*workload_preset("openchat"), 0.6, 128, 1234);

    ReplicaConfig base;
    base.scheduler = SchedulerPolicy::StallFree;
    base.token_budget = 1024;
    base.max_batch_size = 512;
    base.kv_blocks = 131072;

    ReplicaConfig combined = base;
    ReplicaConfig chunked_only = base;
    chunked_only.hybrid_batching = false;
    ReplicaConfig hybrid_only = base;
    hybrid_only.scheduler = SchedulerPolicy::OrcaHybrid;

    const LatencyReport lat_combined = summarize(simulate(combined, yi, trace, light_options()));
    const LatencyReport lat_chunked = summarize(simulate(chunked_only, yi, trace, light_options()));
    const LatencyReport lat_hybrid = summarize(simulate(hybrid_only, yi, trace, light_options()));

    const bool tbt_order = lat_hybrid.tbt_p99_ms > lat_combined.tbt_p99_ms;
    const bool ttft_order = lat_chunked.ttft_median_ms > lat_combined.ttft_median_ms;
    char detail[192];
    std::snprintf(detail, sizeof detail,
                  "P99 TBT: hybrid-only=%.0fms > combined=%.0fms; TTFT med: chunked-only=%.0fms > combined=%.0fms",
                  lat_hybrid.tbt_p99_ms, lat_combined.tbt_p99_ms, lat_chunked.ttft_median_ms,
                  lat_combined.ttft_median_ms);
    report(5, tbt_order && ttft_order, "ablation ordering at token budget 1024", detail);
}

void ac6_stall_free_property_suite() {
    const auto params = *model_preset("yi34b");
    std::mt19937_64 gen(991);
    int traces = 0, vllm_stall_traces = 0;
    std::string first_error;

    for (int round = 0; round < 1000; ++round) {
        const int n = 2 + static_cast<int>(gen() % 11);
        std::vector<Request> trace;
        TimeUs t = 0;
        for (int i = 0; i < n; ++i) {
            t += static_cast<TimeUs>(gen() % 400'000);
            trace.emplace_back(i, t, 1 + static_cast<int>(gen() % 1500),
                               1 + static_cast<int>(gen() % 24));
        }
        ReplicaConfig cfg;
        cfg.scheduler = SchedulerPolicy::StallFree;
        const int budgets[] = {256, 512, 1024};
        cfg.token_budget = budgets[gen() % 3];
        cfg.max_batch_size = 64;
        cfg.pp_degree = round % 4 == 3 ? 2 : 1;
        cfg.kv_blocks = 65536;

        const SimReport rep = simulate(cfg, params, trace);
        traces++;
        for (const auto& err : {checks::check_stall_freedom_and_chunk_cover(rep),
                                checks::check_token_budget(rep, cfg.token_budget),
                                checks::check_tbt_bound(rep, cfg, params)}) {
            if (!err.empty() && first_error.empty())
                first_error = "round " + std::to_string(round) + ": " + err;
        }

        if (round % 10 == 0) {
            ReplicaConfig vllm = cfg;
            vllm.scheduler = SchedulerPolicy::VllmEager;
            vllm.pp_degree = 1;
            const SimReport vrep = simulate(vllm, params, trace, light_options());
            double worst = 0;
            for (const auto& r : vrep.requests) worst = std::max(worst, max_tbt_ms(r));
            for (std::size_t i = 1; i < trace.size(); ++i)
                if (worst >= iteration_time(make_prefill_batch(trace[i].prompt_tokens), params)) {
                    vllm_stall_traces++;
                    break;
                }
        }
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "%d traces; invariants: %s; vllm stall traces: %d (need >=1)", traces,
                  first_error.empty() ? "all hold" : first_error.c_str(), vllm_stall_traces);
    report(6, first_error.empty() && vllm_stall_traces >= 1,
           "stall-free invariant suite over randomized traces", detail);
}

void ac7_capacity_directionality() {
    const auto yi = *model_preset("yi34b");
    const auto slo = slo_thresholds(yi);
    const auto openchat = *workload_preset("openchat");
    const auto arxiv = *workload_preset("arxiv");
    const int probe_requests = 2048;
    const std::uint64_t seed = 17;

    const SchedulerPolicy order[] = {SchedulerPolicy::RequestLevel, SchedulerPolicy::VllmEager,
                                     SchedulerPolicy::OrcaHybrid, SchedulerPolicy::StallFree};
    double cap[4][2][2];  // [scheduler][workload: 0 openchat, 1 arxiv][slo: 0 strict, 1 relaxed]
    for (int s = 0; s < 4; ++s)
        for (int w = 0; w < 2; ++w)
            for (int m = 0; m < 2; ++m)
                cap[s][w][m] = capacity_for(order[s], w == 0 ? openchat : arxiv,
                                            m == 0 ? slo.strict_ms : slo.relaxed_ms, yi,
                                            probe_requests, seed);

    bool ok = true;
    std::string detail;
    for (int w = 0; w < 2; ++w) {
        // Strict-SLO ordering: stall-free >= vllm >= request-level.
        ok = ok && cap[3][w][0] >= cap[1][w][0] && cap[1][w][0] >= cap[0][w][0];
        for (int s = 0; s < 4; ++s) ok = ok && cap[s][w][1] >= cap[s][w][0];
    }
    // Longer prompts lower capacity for every iteration-level scheduler.
    for (int s = 1; s < 4; ++s)
        for (int m = 0; m < 2; ++m) ok = ok && cap[s][0][m] >= cap[s][1][m];

    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "openchat strict rl/vllm/orca/sf = %.2f/%.2f/%.2f/%.2f qps; arxiv strict = %.2f/%.2f/%.2f/%.2f",
                  cap[0][0][0], cap[1][0][0], cap[2][0][0], cap[3][0][0], cap[0][1][0],
                  cap[1][1][0], cap[2][1][0], cap[3][1][0]);
    detail = buf;
    report(7, ok, "capacity directionality across schedulers, SLOs and workloads", detail);
}

void ac8_vllm_batch_size_insensitivity() {
    const auto yi = *model_preset("yi34b");
    const auto slo = slo_thresholds(yi);
    const auto openchat = *workload_preset("openchat");
    double lo = 1e300, hi = 0;
    std::string detail;
    for (int bs : {32, 64, 128}) {
        const double c =
            capacity_for(SchedulerPolicy::VllmEager, openchat, slo.strict_ms, yi, 2048, 17, bs);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
        char buf[48];
        std::snprintf(buf, sizeof buf, "bs%d=%.3f ", bs, c);
        detail += buf;
    }
    const double spread = (hi - lo) / hi;
    char buf[64];
    std::snprintf(buf, sizeof buf, "spread=%.1f%% (<15%%)", 100.0 * spread);
    detail += buf;
    report(8, spread < 0.15, "vllm capacity insensitive to max batch size under strict SLO",
           detail);
}

void ac9_oracle_equivalence() {
    const auto params = *model_preset("mistral7b");
    std::mt19937_64 gen(4242);
    int compared = 0;
    std::string first_error;
    for (int round = 0; round < 100; ++round) {
        const int n = 1 + static_cast<int>(gen() % 5);
        std::vector<Request> trace;
        TimeUs t = 0;
        for (int i = 0; i < n; ++i) {
            t += static_cast<TimeUs>(gen() % 2'000'000);
            trace.emplace_back(i, t, 1 + static_cast<int>(gen() % 3000),
                               1 + static_cast<int>(gen() % 12));
        }
        ReplicaConfig cfg;
        cfg.scheduler = static_cast<SchedulerPolicy>(round % 4);
        cfg.token_budget = 512;
        const SimReport a = simulate(cfg, params, trace);
        const SimReport b = reference_simulate(cfg, params, trace);
        compared++;
        if (a.event_log_jsonl() != b.event_log_jsonl() && first_error.empty())
            first_error = "divergence at round " + std::to_string(round);
    }
    report(9, first_error.empty(), "engine event logs equal the brute-force reference",
           first_error.empty() ? std::to_string(compared) + " traces, all exact" : first_error);
}

void ac10_capacity_determinism() {
    const auto tmp = fs::temp_directory_path() / "servesim_acceptance";
    fs::create_directories(tmp);
    const auto cfg_path = tmp / "cap_det.json";
    {
        std::ofstream out(cfg_path);
        out << R"({
            "model_params": "yi34b",
            "replica": {"scheduler": "stall_free", "token_budget": 512,
                         "max_batch_size": 512, "kv_blocks": 131072,
                         "kv_watermark_frac": 0.2},
            "workload": {"dataset": "openchat", "qps": 1.0, "n_requests": 1, "seed": 17},
            "capacity": {"probe_requests": 512, "qps_low": 0.01, "max_qps": 64}
        })";
    }
    CommandOptions o1, o2;
    o1.out_dir_override = (tmp / "run1").string();
    o2.out_dir_override = (tmp / "run2").string();
    const int rc1 = cmd_capacity(cfg_path.string(), o1);
    const int rc2 = cmd_capacity(cfg_path.string(), o2);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = slurp(tmp / "run1" / "capacity.csv");
    const std::string b = slurp(tmp / "run2" / "capacity.csv");
    const bool ok = rc1 == 0 && rc2 == 0 && !a.empty() && a == b;
    report(10, ok, "capacity command reruns are byte-identical",
           ok ? std::to_string(std::count(a.begin(), a.end(), '\n') - 1) + " rows identical"
              : "outputs differ or command failed");
}

}  // namespace

int main() {
    std::printf("acceptance suite\n");
    ac1_calibration_anchors();
    ac2_bubble_reproduction();
    ac3_slo_table();
    ac4_chunk_overhead();
    ac5_ablation_ordering();
    ac6_stall_free_property_suite();
    ac7_capacity_directionality();
    ac8_vllm_batch_size_insensitivity();
    ac9_oracle_equivalence();
    ac10_capacity_determinism();
    std::printf("%d criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
