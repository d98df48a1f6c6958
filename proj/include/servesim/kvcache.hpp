// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#pragma once

#include <cstdint>
#include <unordered_map>

#include "servesim/core.hpp"

namespace servesim {

/// ceil(tokens / block_size); 0 for an empty allocation.
std::int64_t blocks_needed(std::int64_t tokens, std::int64_t block_size);

/// Block-based (paged) KV-cache ledger. Physical blocks track the tokens
/// actually resident; a separate commitment ledger tracks each live request's
/// admission-time reservation (prompt plus reserve_decode_tokens) so that
/// admission decisions account for growth that has not happened yet. With
/// exact per-request reservations this makes admission provably safe.
///
/// There is no preemption or swapping: running out of blocks is a
/// configuration error surfaced as OutOfKvBlocks.
class KvCacheState {
public:
    KvCacheState(std::int64_t total_blocks, std::int64_t block_size)
        : total_blocks_(total_blocks), block_size_(block_size) {
        if (total_blocks < 0 || block_size < 1)
            throw ContractViolation("invalid kv cache geometry");
    }

    /// Admission check for a queued request; does not mutate state. True iff
    /// the uncommitted pool covers the request's full reservation while
    /// keeping watermark_frac of all blocks held back.
    bool can_allocate_request(std::int64_t prompt_tokens, std::int64_t reserve_decode_tokens,
                              double watermark_frac = 0.0) const;

    /// Registers a live request and its commitment; no blocks are allocated yet.
    void admit(int request_id, std::int64_t expected_total_tokens);

    /// Grows a request's resident tokens; allocates blocks as needed.
    void grow(int request_id, std::int64_t new_total_tokens);

    /// Returns a finished request's blocks to the free pool.
    void release(int request_id);

    std::int64_t total_blocks() const { return total_blocks_; }
    std::int64_t block_size() const { return block_size_; }
    std::int64_t free_blocks() const { return total_blocks_ - allocated_total_; }
    std::int64_t allocated_total() const { return allocated_total_; }
    std::int64_t committed_total() const { return committed_total_; }
    std::int64_t allocated_for(int request_id) const;
    bool is_live(int request_id) const { return live_.count(request_id) > 0; }

private:
    struct Entry {
        std::int64_t tokens = 0;     // resident tokens
        std::int64_t blocks = 0;     // = blocks_needed(tokens)
        std::int64_t committed = 0;  // max(reservation blocks, blocks)
    };

    std::int64_t total_blocks_;
    std::int64_t block_size_;
    std::int64_t allocated_total_ = 0;
    std::int64_t committed_total_ = 0;
    std::unordered_map<int, Entry> live_;
};

}  // namespace servesim
