// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/presets.hpp"

namespace servesim {

namespace {

CostModelParams mistral7b() {
    CostModelParams p;
    p.name = "mistral7b";
    p.hidden_size = 4096;
    p.ffn_hidden_size = 14336;
    p.per_token_linear_ms = 0.0263671875;  // floor 13.5 ms at saturation
    p.saturation_tokens = 512;
    p.attn_prefill_quad_ms = 2.0e-7;
    p.attn_kv_read_ms = 4.2e-7;
    p.attn_decode_per_kv_ms = 3.4332275390625e-05;  // 4.5 ms for 32x4k decode
    p.fixed_overhead_ms = 2.0;
    p.pp_send_ms = 1.0;
    return p;
}

CostModelParams yi34b() {
    CostModelParams p;
    p.name = "yi34b";
    p.hidden_size = 7168;
    p.ffn_hidden_size = 20480;
    p.per_token_linear_ms = 0.33;
    p.saturation_tokens = 43;  // floor 14.19 ms
    p.attn_prefill_quad_ms = 3.0e-7;
    p.attn_kv_read_ms = 6.3e-7;
    p.attn_decode_per_kv_ms = 6.1798095703125e-06;  // 0.81 ms for 32x4k decode
    p.fixed_overhead_ms = 25.0;
    p.pp_send_ms = 1.0;
    return p;
}

CostModelParams llama70b() {
    CostModelParams p;
    p.name = "llama70b";
    p.hidden_size = 8192;
    p.ffn_hidden_size = 28672;
    p.per_token_linear_ms = 1.5;
    p.saturation_tokens = 100;  // floor 150 ms
    p.attn_prefill_quad_ms = 7.0e-7;
    p.attn_kv_read_ms = 1.47e-6;
    p.attn_decode_per_kv_ms = 3.509521484375e-04;  // 46 ms for 32x4k decode
    p.fixed_overhead_ms = 4.0;
    p.pp_send_ms = 3.0;
    return p;
}

CostModelParams falcon180b() {
    CostModelParams p;
    p.name = "falcon180b";
    p.hidden_size = 14848;
    p.ffn_hidden_size = 59392;
    p.per_token_linear_ms = 0.244140625;  // floor 125 ms; 1000 ms at 4096 tokens
    p.saturation_tokens = 512;
    p.attn_prefill_quad_ms = 8.6e-6;
    p.attn_kv_read_ms = 1.806e-5;
    p.attn_decode_per_kv_ms = 5.340576171875e-04;  // 70 ms for 32x4k decode
    p.fixed_overhead_ms = 5.0;
    p.pp_send_ms = 2.0;
    return p;
}

}  // namespace

std::optional<CostModelParams> model_preset(const std::string& name) {
    if (name == "mistral7b") return mistral7b();
    if (name == "yi34b") return yi34b();
    if (name == "llama70b") return llama70b();
    if (name == "falcon180b") return falcon180b();
    return std::nullopt;
}

std::vector<std::string> model_preset_names() {
    return {"mistral7b", "yi34b", "llama70b", "falcon180b"};
}

std::optional<WorkloadSpec> workload_preset(const std::string& name) {
    if (name == "openchat") {
        WorkloadSpec w;
        w.name = "openchat";
        w.prompt = LengthDistribution{1730, 5696};
        w.output = LengthDistribution{415, 834};
        w.max_total = 8192;
        return w;
    }
    if (name == "arxiv") {
        WorkloadSpec w;
        w.name = "arxiv";
        w.prompt = LengthDistribution{7059, 12985};
        w.output = LengthDistribution{208, 371};
        w.max_total = 16384;
        return w;
    }
    return std::nullopt;
}

std::vector<std::string> workload_preset_names() { return {"openchat", "arxiv"}; }

}  // namespace servesim
