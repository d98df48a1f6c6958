// Copyright the servesim authors. Apache-2.0 license; see LICENSE.
#include <doctest.h>

#include "servesim/core.hpp"

using namespace servesim;

TEST_CASE("prefill completion emits the first token") {
    Request r(0, 0, 100, 5);
    r.prefill_done = 60;
    r.state = RequestState::Prefilling;
    apply_iteration_result(r, make_chunk_entry(r, 40), ms_to_us(50));
    CHECK(r.prefill_done == 100);
    CHECK(r.state == RequestState::Decoding);
    CHECK(r.first_token_time.has_value());
    CHECK(*r.first_token_time == ms_to_us(50));
    CHECK(r.decodes_done == 1);
    CHECK(r.token_emit_times.size() == 1);
}

TEST_CASE("partial chunk advances prefill without emitting") {
    Request r(0, 0, 100, 5);
    apply_iteration_result(r, make_chunk_entry(r, 60), ms_to_us(30));
    CHECK(r.prefill_done == 60);
    CHECK(r.state == RequestState::Prefilling);
    CHECK_FALSE(r.first_token_time.has_value());
    CHECK(r.token_emit_times.empty());
}

TEST_CASE("last decode finishes the request") {
    Request r(0, 0, 100, 5);
    r.prefill_done = 100;
    r.decodes_done = 4;
    r.state = RequestState::Decoding;
    r.first_token_time = ms_to_us(10);
    r.token_emit_times = {ms_to_us(10), ms_to_us(20), ms_to_us(30), ms_to_us(40)};
    apply_iteration_result(r, make_decode_entry(r), ms_to_us(90));
    CHECK(r.decodes_done == 5);
    CHECK(r.state == RequestState::Finished);
    CHECK(r.token_emit_times.size() == 5);
}

TEST_CASE("single-output request finishes at prefill completion") {
    Request r(0, 0, 64, 1);
    apply_iteration_result(r, make_chunk_entry(r, 64), ms_to_us(7));
    CHECK(r.state == RequestState::Finished);
    CHECK(r.decodes_done == 1);
    CHECK(r.token_emit_times.size() == 1);
}

TEST_CASE("decode before prefill completes is a contract violation") {
    Request r(0, 0, 100, 5);
    r.prefill_done = 50;
    r.state = RequestState::Prefilling;
    BatchEntry e;
    e.request_id = 0;
    e.kind = EntryKind::Decode;
    CHECK_THROWS_AS(apply_iteration_result(r, e, 1000), ContractViolation);
}

TEST_CASE("chunk larger than remaining prompt is rejected") {
    Request r(0, 0, 100, 5);
    r.prefill_done = 80;
    r.state = RequestState::Prefilling;
    CHECK_THROWS_AS(make_chunk_entry(r, 21), ContractViolation);
    CHECK_THROWS_AS(make_chunk_entry(r, 0), ContractViolation);
}

TEST_CASE("entry for the wrong request is rejected") {
    Request r(3, 0, 100, 5);
    BatchEntry e;
    e.request_id = 4;
    e.kind = EntryKind::PrefillChunk;
    e.chunk_tokens = 10;
    CHECK_THROWS_AS(apply_iteration_result(r, e, 1000), ContractViolation);
}

TEST_CASE("full lifecycle keeps invariants") {
    Request r(0, ms_to_us(5), 300, 3);
    TimeUs t = ms_to_us(10);
    int chunks_total = 0;
    for (int c : {128, 128, 44}) {
        apply_iteration_result(r, make_chunk_entry(r, c), t);
        chunks_total += c;
        t += ms_to_us(10);
    }
    CHECK(chunks_total == r.prompt_tokens);
    while (!r.finished()) {
        apply_iteration_result(r, make_decode_entry(r), t);
        t += ms_to_us(10);
    }
    REQUIRE(r.first_token_time.has_value());
    CHECK(*r.first_token_time - r.arrival_time >= 0);  // TTFT >= 0
    for (std::size_t i = 1; i < r.token_emit_times.size(); ++i)
        CHECK(r.token_emit_times[i] > r.token_emit_times[i - 1]);
    CHECK(static_cast<int>(r.token_emit_times.size()) == r.output_tokens);
}

TEST_CASE("batch token totals") {
    Request a(0, 0, 100, 2), b(1, 0, 50, 2);
    b.prefill_done = 50;
    b.decodes_done = 1;
    b.state = RequestState::Decoding;
    Batch batch;
    batch.entries.push_back(make_chunk_entry(a, 60));
    batch.entries.push_back(make_decode_entry(b));
    CHECK(batch.total_tokens() == 61);
    CHECK(batch.prefill_tokens() == 60);
    CHECK(batch.decode_tokens() == 1);
    CHECK(batch.decode_kv_tokens() == 50);
    CHECK_FALSE(batch.decode_only());
}

TEST_CASE("replica config validation") {
    ReplicaConfig r;
    r.token_budget = 128;
    r.tile_size = 256;
    CHECK_THROWS_AS(r.validate(), ContractViolation);  // budget below tile size
    r.token_budget = 256;
    CHECK_NOTHROW(r.validate());
    r.scheduler = SchedulerPolicy::VllmEager;
    r.token_budget = 1;  // unused by vllm
    CHECK_NOTHROW(r.validate());
}

TEST_CASE("scheduler names round-trip") {
    for (const auto& n : scheduler_names()) {
        auto p = scheduler_from_string(n);
        REQUIRE(p.has_value());
        CHECK(std::string(to_string(*p)) == n);
    }
    CHECK_FALSE(scheduler_from_string("bogus").has_value());
}
