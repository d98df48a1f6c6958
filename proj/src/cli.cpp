// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/cli.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "servesim/engine.hpp"
#include "servesim/sched.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace servesim {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double get_num(const json& j, const char* key, double fallback, bool required = false) {
    if (!j.contains(key)) {
        if (required) throw ConfigError(std::string("missing required field: ") + key);
        return fallback;
    }
    if (!j.at(key).is_number()) throw ConfigError(std::string("field must be a number: ") + key);
    return j.at(key).get<double>();
}

SloMode parse_slo(const json& j) {
    SloMode m;
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "strict") m.kind = SloMode::Kind::Strict;
        else if (s == "relaxed") m.kind = SloMode::Kind::Relaxed;
        else throw ConfigError("slo_mode must be strict, relaxed or {\"explicit_ms\": x}");
        return m;
    }
    if (j.is_object() && j.contains("explicit_ms")) {
        m.kind = SloMode::Kind::Explicit;
        m.explicit_ms = j.at("explicit_ms").get<double>();
        if (m.explicit_ms <= 0) throw ConfigError("explicit_ms must be positive");
        return m;
    }
    throw ConfigError("slo_mode must be strict, relaxed or {\"explicit_ms\": x}");
}

CostModelParams parse_params_json(const json& j) {
    CostModelParams p;
    p.name = j.value("name", std::string("custom"));
    p.hidden_size = static_cast<int>(get_num(j, "hidden_size", 0));
    p.ffn_hidden_size = static_cast<int>(get_num(j, "ffn_hidden_size", 0));
    p.per_token_linear_ms = get_num(j, "per_token_linear_ms", 0, true);
    p.saturation_tokens = static_cast<int>(get_num(j, "saturation_tokens", 0, true));
    p.attn_prefill_quad_ms = get_num(j, "attn_prefill_quad_ms", 0);
    p.attn_kv_read_ms = get_num(j, "attn_kv_read_ms", 0);
    p.attn_decode_per_kv_ms = get_num(j, "attn_decode_per_kv_ms", 0);
    p.fixed_overhead_ms = get_num(j, "fixed_overhead_ms", 0);
    p.tp_comm_ms = get_num(j, "tp_comm_ms", 0);
    p.pp_send_ms = get_num(j, "pp_send_ms", 0);
    p.tile_size = static_cast<int>(get_num(j, "tile_size", 256));
    p.tile_penalty_frac = get_num(j, "tile_penalty_frac", 0.32);
    p.validate();
    return p;
}

CostModelParams resolve_params(const json& j) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (auto p = model_preset(name)) return *p;
        std::string names;
        for (const auto& n : model_preset_names()) names += n + " ";
        throw ConfigError("unknown model preset '" + name + "'; bundled presets: " + names);
    }
    if (j.is_object() && j.contains("path")) {
        const json file = json::parse(read_file(j.at("path").get<std::string>()));
        return parse_params_json(file);
    }
    if (j.is_object()) return parse_params_json(j);
    throw ConfigError("model_params must be a preset name, an inline object, or {\"path\": ...}");
}

ReplicaConfig parse_replica(const json& j, const CostModelParams& params, bool& budget_auto) {
    ReplicaConfig r;
    if (!j.contains("scheduler")) throw ConfigError("replica.scheduler is required");
    const std::string sched_name = j.at("scheduler").get<std::string>();
    const auto policy = scheduler_from_string(sched_name);
    if (!policy) {
        std::string names;
        for (const auto& n : scheduler_names()) names += n + " ";
        throw ConfigError("unknown scheduler '" + sched_name + "'; valid values: " + names);
    }
    r.scheduler = *policy;

    budget_auto = false;
    if (j.contains("token_budget")) {
        if (j.at("token_budget").is_string()) {
            if (j.at("token_budget").get<std::string>() != "auto")
                throw ConfigError("token_budget must be a count or \"auto\"");
            budget_auto = true;
        } else {
            r.token_budget = static_cast<int>(get_num(j, "token_budget", r.token_budget));
        }
    }
    r.max_batch_size = static_cast<int>(get_num(j, "max_batch_size", r.max_batch_size));
    r.max_num_batched_tokens = static_cast<int>(get_num(j, "max_num_batched_tokens", r.max_num_batched_tokens));
    r.max_batch_size_orca = static_cast<int>(get_num(j, "max_batch_size_orca", 0));
    r.tp_degree = static_cast<int>(get_num(j, "tp_degree", 1));
    r.pp_degree = static_cast<int>(get_num(j, "pp_degree", 1));
    r.kv_blocks = static_cast<std::int64_t>(get_num(j, "kv_blocks", static_cast<double>(r.kv_blocks)));
    r.kv_block_size = static_cast<int>(get_num(j, "kv_block_size", r.kv_block_size));
    r.tile_size = static_cast<int>(get_num(j, "tile_size", params.tile_size));
    r.chunk_align = static_cast<int>(get_num(j, "chunk_align", r.chunk_align));
    r.reserve_decode_tokens = static_cast<int>(get_num(j, "reserve_decode_tokens", 0));
    r.kv_watermark_frac = get_num(j, "kv_watermark_frac", r.kv_watermark_frac);
    r.pipeline_tbt_factor = get_num(j, "pipeline_tbt_factor", 0.0);
    if (j.contains("hybrid_batching")) r.hybrid_batching = j.at("hybrid_batching").get<bool>();
    return r;
}

WorkloadSpec parse_custom_workload(const json& j) {
    WorkloadSpec w;
    w.name = "custom";
    w.prompt = LengthDistribution{get_num(j, "prompt_median", 0, true), get_num(j, "prompt_p90", 0, true)};
    w.output = LengthDistribution{get_num(j, "output_median", 0, true), get_num(j, "output_p90", 0, true)};
    w.max_total = static_cast<std::int64_t>(get_num(j, "max_total", 8192));
    return w;
}

}  // namespace

double SloMode::resolve_ms(const CostModelParams& params) const {
    const SloThresholds t = slo_thresholds(params);
    switch (kind) {
        case Kind::Strict: return t.strict_ms;
        case Kind::Relaxed: return t.relaxed_ms;
        case Kind::Explicit: return explicit_ms;
    }
    return t.strict_ms;
}

std::string SloMode::label() const {
    switch (kind) {
        case Kind::Strict: return "strict";
        case Kind::Relaxed: return "relaxed";
        case Kind::Explicit: {
            char buf[48];
            std::snprintf(buf, sizeof buf, "explicit_%.0fms", explicit_ms);
            return buf;
        }
    }
    return "strict";
}

ExperimentConfig parse_config_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    if (!j.contains("model_params")) throw ConfigError("model_params is required");
    cfg.params = resolve_params(j.at("model_params"));

    if (!j.contains("replica")) throw ConfigError("replica is required");
    cfg.replica = parse_replica(j.at("replica"), cfg.params, cfg.token_budget_auto);

    if (!j.contains("workload")) throw ConfigError("workload is required");
    const json& w = j.at("workload");
    if (!w.contains("seed")) throw ConfigError("workload.seed is required (no wall-clock entropy)");
    cfg.seed = w.at("seed").get<std::uint64_t>();
    if (w.contains("trace_path")) {
        cfg.trace_path = w.at("trace_path").get<std::string>();
    } else {
        if (!w.contains("dataset")) throw ConfigError("workload.dataset or workload.trace_path is required");
        const std::string ds = w.at("dataset").get<std::string>();
        if (ds == "custom") {
            cfg.workload = parse_custom_workload(w);
        } else if (auto spec = workload_preset(ds)) {
            cfg.workload = *spec;
        } else {
            throw ConfigError("unknown dataset '" + ds + "'; presets: openchat arxiv custom");
        }
        cfg.qps = get_num(w, "qps", 1.0);
        cfg.n_requests = static_cast<int>(get_num(w, "n_requests", 0, true));
        if (cfg.n_requests < 1) throw ConfigError("workload.n_requests must be >= 1");
    }

    if (j.contains("slo_mode")) cfg.slo = parse_slo(j.at("slo_mode"));
    if (j.contains("output") && j.at("output").contains("dir"))
        cfg.out_dir = j.at("output").at("dir").get<std::string>();

    if (j.contains("capacity")) {
        const json& c = j.at("capacity");
        if (c.contains("schedulers")) {
            for (const auto& s : c.at("schedulers")) {
                const auto p = scheduler_from_string(s.get<std::string>());
                if (!p) throw ConfigError("unknown scheduler in capacity.schedulers");
                cfg.cap_schedulers.push_back(*p);
            }
        }
        if (c.contains("slo_modes"))
            for (const auto& s : c.at("slo_modes")) cfg.cap_slo_modes.push_back(parse_slo(s));
        cfg.cap_opts.qps_low = get_num(c, "qps_low", cfg.cap_opts.qps_low);
        cfg.cap_opts.max_qps = get_num(c, "max_qps", cfg.cap_opts.max_qps);
        cfg.cap_opts.rel_width = get_num(c, "rel_width", cfg.cap_opts.rel_width);
        cfg.probe_requests = static_cast<int>(get_num(c, "probe_requests", cfg.probe_requests));
    }
    if (cfg.cap_schedulers.empty())
        for (const auto& n : scheduler_names()) cfg.cap_schedulers.push_back(*scheduler_from_string(n));
    if (cfg.cap_slo_modes.empty()) {
        cfg.cap_slo_modes.push_back(SloMode{SloMode::Kind::Strict, 0});
        cfg.cap_slo_modes.push_back(SloMode{SloMode::Kind::Relaxed, 0});
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        cfg.sweep_knob = s.value("knob", std::string());
        if (s.contains("values"))
            for (const auto& v : s.at("values")) cfg.sweep_values.push_back(v.get<double>());
    }

    if (cfg.token_budget_auto && cfg.replica.scheduler == SchedulerPolicy::StallFree) {
        TokenBudgetSpec spec;
        spec.chunk_align = cfg.replica.chunk_align;
        cfg.replica.token_budget =
            compute_token_budget(cfg.slo.resolve_ms(cfg.params), cfg.params,
                                 cfg.replica.pp_degree, spec);
    }
    cfg.replica.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config_text(read_file(path));
}

std::vector<Request> ExperimentConfig::build_trace(double qps_override) const {
    if (!trace_path.empty()) return load_trace(trace_path);
    return make_trace(*workload, qps_override > 0 ? qps_override : qps, n_requests, seed);
}

std::string params_to_json(const CostModelParams& p) {
    json j;
    j["name"] = p.name;
    j["hidden_size"] = p.hidden_size;
    j["ffn_hidden_size"] = p.ffn_hidden_size;
    j["per_token_linear_ms"] = p.per_token_linear_ms;
    j["saturation_tokens"] = p.saturation_tokens;
    j["mem_floor_ms"] = p.mem_floor_ms();  // derived, informational
    j["attn_prefill_quad_ms"] = p.attn_prefill_quad_ms;
    j["attn_kv_read_ms"] = p.attn_kv_read_ms;
    j["attn_decode_per_kv_ms"] = p.attn_decode_per_kv_ms;
    j["fixed_overhead_ms"] = p.fixed_overhead_ms;
    j["tp_comm_ms"] = p.tp_comm_ms;
    j["pp_send_ms"] = p.pp_send_ms;
    j["tile_size"] = p.tile_size;
    j["tile_penalty_frac"] = p.tile_penalty_frac;
    j["note"] = "synthetic desk-scale calibration; not a hardware measurement";
    return j.dump(2) + "\n";
}

CostModelParams params_from_json_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("params file is not valid JSON: ") + e.what());
    }
    return parse_params_json(j);
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write file: " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
}

std::string report_json(const LatencyReport& lat, const SimReport& sim, double slo_ms,
                        const std::string& slo_label) {
    json j;
    j["ttft_median_ms"] = lat.ttft_median_ms;
    j["tbt_p99_ms"] = lat.tbt_p99_ms;
    j["tbt_median_ms"] = lat.tbt_median_ms;
    j["tbt_samples"] = lat.tbt_samples;
    j["sched_delay_median_ms"] = lat.sched_delay_median_ms;
    j["throughput_tokens_per_s"] = lat.throughput_tps;
    j["bubble_fraction"] = lat.bubble_fraction;
    j["makespan_ms"] = lat.makespan_ms;
    j["n_requests"] = lat.n_requests;
    j["num_microbatches"] = sim.num_microbatches;
    j["slo_ms"] = slo_ms;
    j["slo_mode"] = slo_label;
    j["meets_slo"] = meets_slo(lat, slo_ms);

    std::int64_t bubble_us = 0;
    json by_class = {{"PB1", 0}, {"PB2", 0}, {"PB3", 0}};
    for (const auto& b : sim.bubbles) {
        bubble_us += b.end - b.start;
        by_class[to_string(b.cls)] = by_class[to_string(b.cls)].get<int>() + 1;
    }
    j["bubbles"] = {{"count", sim.bubbles.size()},
                    {"total_ms", us_to_ms(bubble_us)},
                    {"by_class", by_class}};

    std::int64_t peak = 0;
    for (const auto& s : sim.kv_series) peak = std::max(peak, s.allocated_blocks);
    j["kv"] = {{"total_blocks", sim.kv_total_blocks}, {"peak_allocated_blocks", peak}};
    return j.dump(2) + "\n";
}

std::string requests_csv(const SimReport& sim) {
    std::string out =
        "id,arrival_ms,prompt_tokens,output_tokens,sched_delay_ms,ttft_ms,finish_ms,tbt_max_ms\n";
    char buf[256];
    for (std::size_t i = 0; i < sim.requests.size(); ++i) {
        const Request& r = sim.requests[i];
        const double delay =
            sim.first_sched_time[i] >= 0 ? us_to_ms(sim.first_sched_time[i] - r.arrival_time) : -1;
        const double ttft = r.first_token_time ? us_to_ms(*r.first_token_time - r.arrival_time) : -1;
        const double finish =
            r.token_emit_times.empty() ? -1 : us_to_ms(r.token_emit_times.back());
        double tbt_max = 0;
        for (std::size_t k = 1; k < r.token_emit_times.size(); ++k)
            tbt_max = std::max(tbt_max,
                               us_to_ms(r.token_emit_times[k] - r.token_emit_times[k - 1]));
        std::snprintf(buf, sizeof buf, "%d,%.3f,%d,%d,%.3f,%.3f,%.3f,%.3f\n", r.id,
                      us_to_ms(r.arrival_time), r.prompt_tokens, r.output_tokens, delay, ttft,
                      finish, tbt_max);
        out += buf;
    }
    return out;
}

std::string capacity_csv(const std::vector<std::array<std::string, 4>>& rows) {
    std::string out = "scheduler,slo,qps,infeasible\n";
    for (const auto& r : rows) out += r[0] + "," + r[1] + "," + r[2] + "," + r[3] + "\n";
    return out;
}

namespace {

void apply_overrides(ExperimentConfig& cfg, const CommandOptions& opts) {
    if (!opts.out_dir_override.empty()) cfg.out_dir = opts.out_dir_override;
    if (opts.seed_override) cfg.seed = *opts.seed_override;
#ifdef _OPENMP
    if (opts.jobs > 0) omp_set_num_threads(opts.jobs);
#endif
}

SimOptions probe_sim_options() {
    SimOptions o;
    o.keep_events = false;
    o.keep_microbatches = false;
    o.keep_kv_series = false;
    return o;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

int cmd_simulate(const std::string& config_path, const CommandOptions& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        apply_overrides(cfg, opts);
        const auto trace = cfg.build_trace(0);
        const SimReport sim = simulate(cfg.replica, cfg.params, trace);
        const LatencyReport lat = summarize(sim);
        const double slo_ms = cfg.slo.resolve_ms(cfg.params);

        write_file_atomic(cfg.out_dir + "/report.json", report_json(lat, sim, slo_ms, cfg.slo.label()));
        write_file_atomic(cfg.out_dir + "/events.jsonl", sim.event_log_jsonl());
        write_file_atomic(cfg.out_dir + "/requests.csv", requests_csv(sim));

        std::printf("tbt_p99=%.3fms ttft_median=%.3fms bubble_fraction=%.4f throughput=%.1ftok/s\n",
                    lat.tbt_p99_ms, lat.ttft_median_ms, lat.bubble_fraction, lat.throughput_tps);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ContractViolation& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const OutOfKvBlocks& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
}

int cmd_capacity(const std::string& config_path, const CommandOptions& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        apply_overrides(cfg, opts);
        if (cfg.trace_path.empty() && !cfg.workload)
            throw ConfigError("capacity needs a workload spec");

        std::vector<std::array<std::string, 4>> rows;
        int feasible_rows = 0;
        for (const auto sched : cfg.cap_schedulers) {
            for (const auto& slo : cfg.cap_slo_modes) {
                ReplicaConfig replica = cfg.replica;
                replica.scheduler = sched;
                const double slo_ms = slo.resolve_ms(cfg.params);
                const ProbeFn probe = [&](double qps) {
                    const auto trace = make_trace(*cfg.workload, qps, cfg.probe_requests, cfg.seed);
                    return summarize(simulate(replica, cfg.params, trace, probe_sim_options()));
                };
                std::string qps_str = fmt(0.0), flag = "1";
                try {
                    const CapacityResult res = capacity_search(probe, slo_ms, cfg.cap_opts);
                    qps_str = fmt(res.qps);
                    flag = "0";
                    feasible_rows++;
                    if (res.monotone_warning)
                        std::fprintf(stderr, "warning: non-monotone probe sequence for %s/%s\n",
                                     to_string(sched), slo.label().c_str());
                } catch (const InfeasibleSlo&) {
                    // row stays qps=0, flag=1
                }
                rows.push_back({to_string(sched), slo.label(), qps_str, flag});
                std::printf("%s,%s,%s,%s\n", to_string(sched), slo.label().c_str(),
                            qps_str.c_str(), flag.c_str());
            }
        }
        write_file_atomic(cfg.out_dir + "/capacity.csv", capacity_csv(rows));
        return feasible_rows == 0 ? 1 : 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ContractViolation& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const OutOfKvBlocks& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
}

int cmd_sweep(const std::string& config_path, const CommandOptions& opts) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        apply_overrides(cfg, opts);
        if (cfg.sweep_knob.empty() || cfg.sweep_values.empty())
            throw ConfigError("sweep.knob and sweep.values are required");
        const std::string& knob = cfg.sweep_knob;
        if (knob != "token_budget" && knob != "qps" && knob != "max_batch_size" && knob != "slo")
            throw ConfigError("unknown sweep knob '" + knob +
                              "'; valid knobs: token_budget qps max_batch_size slo");

        const std::size_t n = cfg.sweep_values.size();
        std::vector<LatencyReport> lats(n);
        std::vector<double> slos(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
            const double v = cfg.sweep_values[i];
            ReplicaConfig replica = cfg.replica;
            double qps = cfg.qps;
            double slo_ms = cfg.slo.resolve_ms(cfg.params);
            if (knob == "token_budget") replica.token_budget = static_cast<int>(v);
            else if (knob == "max_batch_size") replica.max_batch_size = static_cast<int>(v);
            else if (knob == "qps") qps = v;
            else slo_ms = v;
            replica.validate();
            const auto trace = cfg.build_trace(qps);
            lats[i] = summarize(simulate(replica, cfg.params, trace, probe_sim_options()));
            slos[i] = slo_ms;
        }

        std::string csv =
            "knob,value,qps,tbt_p99_ms,ttft_median_ms,sched_delay_median_ms,"
            "throughput_tokens_per_s,bubble_fraction,pass\n";
        for (std::size_t i = 0; i < n; ++i) {
            const double v = cfg.sweep_values[i];
            const double qps = knob == "qps" ? v : cfg.qps;
            csv += knob + "," + fmt(v) + "," + fmt(qps) + "," + fmt(lats[i].tbt_p99_ms) + "," +
                   fmt(lats[i].ttft_median_ms) + "," + fmt(lats[i].sched_delay_median_ms) + "," +
                   fmt(lats[i].throughput_tps) + "," + fmt(lats[i].bubble_fraction) + "," +
                   (meets_slo(lats[i], slos[i]) ? "1" : "0") + "\n";
        }
        write_file_atomic(cfg.out_dir + "/sweep.csv", csv);
        std::printf("%s", csv.c_str());
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ContractViolation& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const OutOfKvBlocks& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }
}

int cmd_calibrate(const std::string& anchors_path, const CommandOptions& opts) {
    try {
        json j;
        try {
            j = json::parse(read_file(anchors_path));
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("anchors file is not valid JSON: ") + e.what());
        }
        if (!j.contains("anchors")) throw ConfigError("anchors file needs an \"anchors\" array");

        std::vector<CalibrationAnchor> anchors;
        for (const auto& a : j.at("anchors")) {
            CalibrationAnchor anchor;
            anchor.observed_ms = get_num(a, "observed_ms", 0, true);
            if (a.contains("decode")) {
                const int count = static_cast<int>(get_num(a.at("decode"), "count", 0, true));
                const auto kv = static_cast<std::int64_t>(get_num(a.at("decode"), "kv", 0, true));
                const Batch d = make_decode_batch(count, kv);
                anchor.batch.entries.insert(anchor.batch.entries.end(), d.entries.begin(),
                                            d.entries.end());
            }
            if (a.contains("chunks")) {
                for (const auto& c : a.at("chunks")) {
                    BatchEntry e;
                    e.request_id = static_cast<int>(anchor.batch.entries.size());
                    e.kind = EntryKind::PrefillChunk;
                    e.chunk_tokens = static_cast<int>(get_num(c, "tokens", 0, true));
                    e.prefix_tokens = static_cast<std::int64_t>(get_num(c, "prefix", 0));
                    anchor.batch.entries.push_back(e);
                }
            }
            anchors.push_back(std::move(anchor));
        }

        CalibrationOptions copts;
        copts.tile_size = static_cast<int>(get_num(j, "tile_size", 256));
        copts.tile_penalty_frac = get_num(j, "tile_penalty_frac", 0.32);

        const CalibrationResult res = calibrate(anchors, copts);

        std::string out_dir = opts.out_dir_override.empty() ? "out" : opts.out_dir_override;
        write_file_atomic(out_dir + "/params.json", params_to_json(res.params));
        for (std::size_t i = 0; i < anchors.size(); ++i)
            std::printf("anchor %zu: observed=%.3fms predicted=%.3fms rel_err=%.2f%%\n", i,
                        anchors[i].observed_ms, res.predicted_ms[i],
                        100.0 * res.relative_error[i]);
        for (const auto& z : res.zeroed_terms)
            std::printf("note: %s not exercised by any anchor; fixed at 0\n", z.c_str());
        std::printf("max_rel_err=%.2f%% params written to %s/params.json\n",
                    100.0 * res.max_relative_error, out_dir.c_str());
        if (res.max_relative_error > 0.15)
            std::printf("warning: residuals exceed 15%%; anchors poorly explained by the model\n");
        return 0;
    } catch (const CalibrationError& e) {
        std::fprintf(stderr, "calibration error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }
}

}  // namespace servesim
