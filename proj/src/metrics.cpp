// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/metrics.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace servesim {

double percentile(std::vector<double> series, double p) {
    if (series.empty()) throw ContractViolation("percentile of empty series");
    if (p < 0.0 || p > 100.0) throw ContractViolation("percentile rank out of range");
    std::sort(series.begin(), series.end());
    const auto n = static_cast<std::int64_t>(series.size());
    std::int64_t idx = static_cast<std::int64_t>(std::ceil(p / 100.0 * static_cast<double>(n))) - 1;
    idx = std::clamp<std::int64_t>(idx, 0, n - 1);
    return series[static_cast<std::size_t>(idx)];
}

LatencyReport summarize(const SimReport& report, double warmup_frac) {
    LatencyReport out;
    const int n = static_cast<int>(report.requests.size());
    out.n_requests = n;
    out.makespan_ms = us_to_ms(report.makespan);

    const int warmup = static_cast<int>(std::floor(warmup_frac * n));
    std::vector<double> ttft, tbt, delay;
    for (int i = warmup; i < n; ++i) {
        const Request& r = report.requests[i];
        if (r.first_token_time)
            ttft.push_back(us_to_ms(*r.first_token_time - r.arrival_time));
        if (report.first_sched_time[i] >= 0)
            delay.push_back(us_to_ms(report.first_sched_time[i] - r.arrival_time));
        for (std::size_t k = 1; k < r.token_emit_times.size(); ++k)
            tbt.push_back(us_to_ms(r.token_emit_times[k] - r.token_emit_times[k - 1]));
    }
    if (!ttft.empty()) out.ttft_median_ms = percentile(ttft, 50);
    if (!delay.empty()) out.sched_delay_median_ms = percentile(delay, 50);
    out.tbt_samples = static_cast<std::int64_t>(tbt.size());
    if (!tbt.empty()) {
        out.tbt_p99_ms = percentile(tbt, 99);
        out.tbt_median_ms = percentile(tbt, 50);
    }

    if (report.makespan > 0)
        out.throughput_tps =
            static_cast<double>(report.total_output_tokens) / (us_to_ms(report.makespan) / 1000.0);

    std::int64_t bubble_us = 0;
    for (const auto& b : report.bubbles) bubble_us += b.end - b.start;
    const auto stages = static_cast<std::int64_t>(report.stage_busy_us.size());
    if (report.makespan > 0 && stages > 0)
        out.bubble_fraction = static_cast<double>(bubble_us) /
                              (static_cast<double>(report.makespan) * static_cast<double>(stages));
    return out;
}

SloThresholds slo_thresholds(const CostModelParams& params) {
    const double ref = decode_reference_time(params);
    return SloThresholds{5.0 * ref, 25.0 * ref};
}

bool meets_slo(const LatencyReport& r, double slo_ms, double max_sched_delay_ms) {
    return r.tbt_p99_ms <= slo_ms && r.sched_delay_median_ms <= max_sched_delay_ms;
}

CapacityResult capacity_search(const ProbeFn& probe, double slo_ms, const CapacityOptions& opts) {
    CapacityResult res;
    auto run = [&](double qps) {
        CapacityProbe p;
        p.qps = qps;
        p.report = probe(qps);
        p.pass = meets_slo(p.report, slo_ms);
        return p;
    };

    // Doubling ladder; fixed grid so results do not depend on thread count.
    std::vector<double> ladder{opts.qps_low};
    while (ladder.back() * 2.0 <= opts.max_qps) ladder.push_back(ladder.back() * 2.0);

    std::vector<CapacityProbe> ladder_probes(ladder.size());
    std::vector<char> done(ladder.size(), 0);
    int first_fail = -1;
    std::size_t next = 0;
    while (next < ladder.size() && first_fail < 0) {
#ifdef _OPENMP
        const std::size_t chunk = std::min<std::size_t>(ladder.size() - next,
                                                        static_cast<std::size_t>(omp_get_max_threads()));
#else
        const std::size_t chunk = 1;
#endif
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(chunk); ++i) {
            ladder_probes[next + i] = run(ladder[next + i]);
            done[next + i] = 1;
        }
        for (std::size_t i = next; i < next + chunk; ++i)
            if (!ladder_probes[i].pass) {
                first_fail = static_cast<int>(i);
                break;
            }
        next += chunk;
    }
    for (std::size_t i = 0; i < ladder.size(); ++i)
        if (done[i]) res.probes.push_back(ladder_probes[i]);

    if (first_fail == 0) throw InfeasibleSlo("qps_low fails the SLO");

    double lo, hi;
    if (first_fail < 0) {
        lo = ladder.back();  // never failed within the grid; report the cap
        hi = ladder.back();
    } else {
        lo = ladder[first_fail - 1];
        hi = ladder[first_fail];
    }

    while (hi - lo > opts.rel_width * hi) {
        const double mid = 0.5 * (lo + hi);
        const CapacityProbe p = run(mid);
        res.probes.push_back(p);
        if (p.pass) lo = mid;
        else hi = mid;
    }

    double best_pass = 0;
    for (const auto& p : res.probes)
        if (p.pass) best_pass = std::max(best_pass, p.qps);
    for (const auto& p : res.probes)
        if (!p.pass && p.qps < best_pass) res.monotone_warning = true;
    res.qps = best_pass;
    return res;
}

}  // namespace servesim
