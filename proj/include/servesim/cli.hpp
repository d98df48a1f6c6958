// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "servesim/core.hpp"
#include "servesim/costmodel.hpp"
#include "servesim/metrics.hpp"
#include "servesim/presets.hpp"
#include "servesim/workload.hpp"

namespace servesim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SloMode {
    enum class Kind { Strict, Relaxed, Explicit };
    Kind kind = Kind::Strict;
    double explicit_ms = 0;

    double resolve_ms(const CostModelParams& params) const;
    std::string label() const;
};

/// One experiment: model parameters, replica configuration, workload source
/// and SLO mode. The seed is mandatory; commands are pure functions of the
/// config file, so reruns are byte-identical.
struct ExperimentConfig {
    CostModelParams params;
    ReplicaConfig replica;
    bool token_budget_auto = false;  // derive tau from the SLO at load time

    std::optional<WorkloadSpec> workload;
    std::string trace_path;  // used instead of synthesis when set
    double qps = 1.0;
    int n_requests = 0;
    std::uint64_t seed = 0;

    SloMode slo;
    std::string out_dir = "out";

    // capacity command
    std::vector<SchedulerPolicy> cap_schedulers;
    std::vector<SloMode> cap_slo_modes;
    CapacityOptions cap_opts;
    int probe_requests = 2048;

    // sweep command
    std::string sweep_knob;
    std::vector<double> sweep_values;

    std::vector<Request> build_trace(double qps_override) const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& json_text);

std::string params_to_json(const CostModelParams& p);
CostModelParams params_from_json_text(const std::string& json_text);

void write_file_atomic(const std::string& path, const std::string& content);

struct CommandOptions {
    std::string out_dir_override;
    std::optional<std::uint64_t> seed_override;
    int jobs = 0;  // 0: library default
};

// Exit codes: 0 ok, 1 SLO-infeasible, 2 config error.
int cmd_simulate(const std::string& config_path, const CommandOptions& opts = {});
int cmd_capacity(const std::string& config_path, const CommandOptions& opts = {});
int cmd_sweep(const std::string& config_path, const CommandOptions& opts = {});
int cmd_calibrate(const std::string& anchors_path, const CommandOptions& opts = {});

// Deterministic CSV/JSON emission, shared with the acceptance suite.
std::string capacity_csv(const std::vector<std::array<std::string, 4>>& rows);
std::string report_json(const LatencyReport& lat, const SimReport& sim, double slo_ms,
                        const std::string& slo_label);
std::string requests_csv(const SimReport& sim);

}  // namespace servesim
