// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "servesim/costmodel.hpp"
#include "servesim/workload.hpp"

namespace servesim {

// Bundled cost-model parameter sets for four model classes. These are
// synthetic desk-scale calibrations (not hardware measurements) anchored so
// that the reference decode iteration and large-prefill timings land at the
// published operating points for each class.
std::optional<CostModelParams> model_preset(const std::string& name);
std::vector<std::string> model_preset_names();

// Workload presets matching the evaluation datasets' length statistics
// (median / P90 of prompt and output tokens, with a total-length cap).
std::optional<WorkloadSpec> workload_preset(const std::string& name);
std::vector<std::string> workload_preset_names();

}  // namespace servesim
