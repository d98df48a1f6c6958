// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "servesim/core.hpp"

namespace servesim {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic RNG with explicitly specified transforms so generated traces
/// are reproducible independent of the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double uniform();      // (0, 1)
    double normal();       // Box-Muller, standard normal
    double exponential(double mean);

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Log-normal length model matched to a (median, P90) pair:
/// mu = ln median, sigma = (ln p90 - ln median) / 1.2816.
struct LengthDistribution {
    double median = 1;
    double p90 = 1;

    double mu() const;
    double sigma() const;
    int sample(Rng& rng) const;  // rounded, >= 1
};

struct WorkloadSpec {
    std::string name;
    LengthDistribution prompt;
    LengthDistribution output;
    std::int64_t max_total = 8192;  // rejection cap on prompt + output
};

/// Draws a (prompt, output) pair, redrawing while the total exceeds max_total.
std::pair<int, int> sample_request(const WorkloadSpec& spec, Rng& rng);

/// Cumulative sum of n exponential gaps with mean 1000/qps ms; strictly
/// increasing microsecond timestamps.
std::vector<TimeUs> poisson_arrivals(double qps, int n, Rng& rng);

std::vector<Request> make_trace(const WorkloadSpec& spec, double qps, int n, std::uint64_t seed);

/// Trace files are CSV with header `arrival_ms,prompt_tokens,output_tokens`,
/// UTF-8, LF line endings; arrivals carry microsecond precision.
std::vector<Request> load_trace(const std::string& path);
void save_trace(const std::vector<Request>& trace, const std::string& path);

std::vector<Request> parse_trace_csv(const std::string& content);
std::string format_trace_csv(const std::vector<Request>& trace);

}  // namespace servesim
