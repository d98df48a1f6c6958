// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <functional>
#include <vector>

#include "servesim/costmodel.hpp"
#include "servesim/engine.hpp"

namespace servesim {

struct LatencyReport {
    double ttft_median_ms = 0;
    double tbt_p99_ms = 0;
    double tbt_median_ms = 0;
    double sched_delay_median_ms = 0;
    double throughput_tps = 0;      // output tokens per second over the run
    double bubble_fraction = 0;     // bubble time over total stage time
    double makespan_ms = 0;
    std::int64_t tbt_samples = 0;
    int n_requests = 0;
};

/// Nearest-rank percentile: element at index ceil(p/100 * n) - 1 of the
/// sorted series. Throws on an empty series.
double percentile(std::vector<double> series, double p);

/// Latency summary of a finished run. The first warmup_frac of requests (by
/// arrival order) is excluded from latency statistics to remove cold-start
/// bias; throughput and bubbles cover the whole run. Requests with a single
/// output token contribute no TBT samples; an empty TBT series reports 0.
LatencyReport summarize(const SimReport& report, double warmup_frac = 0.05);

struct SloThresholds {
    double strict_ms = 0;   // 5x the reference decode iteration
    double relaxed_ms = 0;  // 25x the reference decode iteration
};

SloThresholds slo_thresholds(const CostModelParams& params);

/// SLO attainment: P99 TBT within the target and the load sustainable
/// (median scheduling delay at most 2 seconds).
bool meets_slo(const LatencyReport& r, double slo_ms, double max_sched_delay_ms = 2000.0);

struct CapacityOptions {
    double qps_low = 0.01;
    double max_qps = 1024.0;
    double rel_width = 0.05;   // bisection stops at (hi-lo) <= rel_width*hi
};

struct CapacityProbe {
    double qps = 0;
    bool pass = false;
    LatencyReport report;
};

struct CapacityResult {
    double qps = 0;                 // highest passing probe
    bool monotone_warning = false;  // some failing probe sits below a passing one
    std::vector<CapacityProbe> probes;
};

using ProbeFn = std::function<LatencyReport(double qps)>;

/// Maximum sustainable load: doubling from qps_low to bracket the failure
/// point (ladder probes may run concurrently), then sequential bisection to
/// the requested relative width. Probes must be deterministic functions of
/// qps. Throws InfeasibleSlo when qps_low itself fails.
CapacityResult capacity_search(const ProbeFn& probe, double slo_ms,
                               const CapacityOptions& opts = {});

}  // namespace servesim
