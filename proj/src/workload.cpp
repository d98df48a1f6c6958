// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace servesim {

namespace {
constexpr double kZ90 = 1.2816;  // standard normal 90th-percentile deviate
}

double Rng::uniform() {
    // 53-bit mantissa in (0, 1); never returns 0 so log() is safe.
    const std::uint64_t bits = gen_() >> 11;
    return (static_cast<double>(bits) + 0.5) * (1.0 / 9007199254740992.0);
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

double Rng::exponential(double mean) { return -mean * std::log(uniform()); }

double LengthDistribution::mu() const { return std::log(median); }

double LengthDistribution::sigma() const {
    if (p90 < median) throw ContractViolation("p90 must be >= median");
    return (std::log(p90) - std::log(median)) / kZ90;
}

int LengthDistribution::sample(Rng& rng) const {
    const double v = std::exp(mu() + sigma() * rng.normal());
    return std::max(1, static_cast<int>(std::llround(v)));
}

std::pair<int, int> sample_request(const WorkloadSpec& spec, Rng& rng) {
    for (;;) {
        const int prompt = spec.prompt.sample(rng);
        const int output = spec.output.sample(rng);
        if (static_cast<std::int64_t>(prompt) + output <= spec.max_total) return {prompt, output};
    }
}

std::vector<TimeUs> poisson_arrivals(double qps, int n, Rng& rng) {
    if (qps <= 0) throw ContractViolation("qps must be positive");
    std::vector<TimeUs> out;
    out.reserve(n);
    const double mean_gap_us = 1e6 / qps;
    TimeUs t = 0;
    for (int i = 0; i < n; ++i) {
        const TimeUs gap = std::max<TimeUs>(
            1, static_cast<TimeUs>(std::llround(rng.exponential(mean_gap_us))));
        t += gap;
        out.push_back(t);
    }
    return out;
}

std::vector<Request> make_trace(const WorkloadSpec& spec, double qps, int n, std::uint64_t seed) {
    Rng len_rng(seed);
    Rng arr_rng(seed ^ 0x9e3779b97f4a7c15ull);
    const auto arrivals = poisson_arrivals(qps, n, arr_rng);
    std::vector<Request> trace;
    trace.reserve(n);
    for (int i = 0; i < n; ++i) {
        const auto [prompt, output] = sample_request(spec, len_rng);
        trace.emplace_back(i, arrivals[i], prompt, output);
    }
    return trace;
}

std::vector<Request> parse_trace_csv(const std::string& content) {
    std::vector<Request> trace;
    std::istringstream in(content);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "arrival_ms,prompt_tokens,output_tokens")
                throw ParseError("line 1: bad trace header");
            continue;
        }
        double arrival_ms;
        long long prompt, output;
        char extra;
        const int got = std::sscanf(line.c_str(), "%lf,%lld,%lld%c", &arrival_ms, &prompt, &output, &extra);
        if (got != 3)
            throw ParseError("line " + std::to_string(line_no) + ": expected arrival_ms,prompt_tokens,output_tokens");
        if (prompt < 1 || output < 1)
            throw ParseError("line " + std::to_string(line_no) + ": token counts must be >= 1");
        trace.emplace_back(static_cast<int>(trace.size()), ms_to_us(arrival_ms),
                           static_cast<int>(prompt), static_cast<int>(output));
    }
    if (line_no == 0) throw ParseError("empty trace file");
    return trace;
}

std::string format_trace_csv(const std::vector<Request>& trace) {
    std::string out = "arrival_ms,prompt_tokens,output_tokens\n";
    char buf[96];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%.3f,%d,%d\n", us_to_ms(r.arrival_time),
                      r.prompt_tokens, r.output_tokens);
        out += buf;
    }
    return out;
}

std::vector<Request> load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open trace file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_trace_csv(buf.str());
}

void save_trace(const std::vector<Request>& trace, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ParseError("cannot write trace file: " + tmp);
        out << format_trace_csv(trace);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw ParseError("cannot rename trace file into place: " + path);
}

}  // namespace servesim
