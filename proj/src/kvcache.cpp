// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include "servesim/kvcache.hpp"

#include <cmath>

namespace servesim {

std::int64_t blocks_needed(std::int64_t tokens, std::int64_t block_size) {
    if (tokens < 0 || block_size < 1) throw ContractViolation("invalid blocks_needed arguments");
    if (tokens == 0) return 0;
    return (tokens + block_size - 1) / block_size;
}

bool KvCacheState::can_allocate_request(std::int64_t prompt_tokens,
                                        std::int64_t reserve_decode_tokens,
                                        double watermark_frac) const {
    const std::int64_t need = blocks_needed(prompt_tokens + reserve_decode_tokens, block_size_);
    const std::int64_t watermark =
        static_cast<std::int64_t>(std::floor(watermark_frac * static_cast<double>(total_blocks_)));
    return total_blocks_ - committed_total_ - watermark >= need;
}

void KvCacheState::admit(int request_id, std::int64_t expected_total_tokens) {
    if (live_.count(request_id)) throw ContractViolation("request already live in kv cache");
    Entry e;
    e.committed = blocks_needed(expected_total_tokens, block_size_);
    committed_total_ += e.committed;
    live_.emplace(request_id, e);
}

void KvCacheState::grow(int request_id, std::int64_t new_total_tokens) {
    auto it = live_.find(request_id);
    if (it == live_.end()) throw ContractViolation("grow on unknown request");
    Entry& e = it->second;
    if (new_total_tokens < e.tokens) throw ContractViolation("kv allocation cannot shrink");

    const std::int64_t new_blocks = blocks_needed(new_total_tokens, block_size_);
    const std::int64_t delta = new_blocks - e.blocks;
    if (delta > free_blocks())
        throw OutOfKvBlocks("out of KV blocks while growing request " + std::to_string(request_id));

    allocated_total_ += delta;
    if (new_blocks > e.committed) {
        committed_total_ += new_blocks - e.committed;
        e.committed = new_blocks;
    }
    e.blocks = new_blocks;
    e.tokens = new_total_tokens;
}

void KvCacheState::release(int request_id) {
    auto it = live_.find(request_id);
    if (it == live_.end()) throw ContractViolation("release on unknown request");
    allocated_total_ -= it->second.blocks;
    committed_total_ -= it->second.committed;
    live_.erase(it);
}

std::int64_t KvCacheState::allocated_for(int request_id) const {
    auto it = live_.find(request_id);
    return it == live_.end() ? 0 : it->second.blocks;
}

}  // namespace servesim
