#include <catch2/catch.hpp>

#include <random>

#include "oracles.hpp"
#include "uvmsim/memsim.hpp"

using namespace uvmsim;
using uvmsim::testing::MinFaultOracle;
using uvmsim::testing::trace_from_pages;

namespace {

SimOptions demand_options(std::size_t capacity, EvictKind evict, std::uint64_t seed = 1) {
    SimOptions opt;
    opt.capacity_pages = capacity;
    opt.evict = evict;
    opt.seed = seed;
    return opt;
}

}  // namespace

TEST_CASE("TimingConfig derives the Table V far-fault latency") {
    TimingConfig timing;
    CHECK(timing.far_fault_cycles() == 66645);  // 45us at 1481 MHz
    CHECK(timing.hit_cycles() == 200);
    timing.prediction_overhead_us = 1.0;
    CHECK(timing.prediction_overhead_cycles() == 1481);

    TimingConfig bad;
    bad.dram_cycles = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero capacity is a configuration error") {
    const Trace t = trace_from_pages({0, 1});
    CHECK_THROWS_AS(run_simulation(t, demand_options(0, EvictKind::Lru)), ConfigError);
}

TEST_CASE("resident access is a hit with no migration") {
    const Trace t = trace_from_pages({0, 0, 0});
    const auto m = run_simulation(t, demand_options(2, EvictKind::Lru));
    CHECK(m.far_faults == 1);
    CHECK(m.hits == 2);
    CHECK(m.migrations_in == 1);
    CHECK(m.pages_thrashed == 0);
}

TEST_CASE("capacity at working set means zero thrashing for every policy") {
    const Trace t = synthesize_trace(PatternLabel::LinearReuse, 32, 128, 3);
    const auto wss = working_set_size(t);
    for (EvictKind e : {EvictKind::Lru, EvictKind::Random, EvictKind::Belady, EvictKind::Chain}) {
        const auto m = run_simulation(t, demand_options(wss, e, 5));
        CHECK(m.pages_thrashed == 0);
        CHECK(m.far_faults == wss);  // compulsory misses only
    }
}

TEST_CASE("LRU on the hand trace [0,1,2,0] at capacity 2 thrashes once") {
    const Trace t = trace_from_pages({0, 1, 2, 0});
    const auto m = run_simulation(t, demand_options(2, EvictKind::Lru));
    CHECK(m.far_faults == 4);
    CHECK(m.pages_thrashed == 1);
    CHECK(m.unique_pages_thrashed == 1);
}

TEST_CASE("demand-load Belady on [0,1,2,0,1,2] at capacity 2 hits the 4-fault minimum") {
    const std::vector<unsigned> pages{0, 1, 2, 0, 1, 2};
    MinFaultOracle oracle(pages, 2);
    REQUIRE(oracle.min_faults() == 4);

    const Trace t = trace_from_pages(pages);
    const auto belady = run_simulation(t, demand_options(2, EvictKind::Belady));
    CHECK(belady.far_faults == 4);
    CHECK(belady.pages_thrashed == 1);

    const auto lru = run_simulation(t, demand_options(2, EvictKind::Lru));
    CHECK(lru.far_faults == 6);  // the classic LRU pathology
}

TEST_CASE("Belady matches the brute-force minimum on random small instances") {
    std::mt19937_64 rng(2024);
    for (int round = 0; round < 60; ++round) {
        const std::size_t len = 4 + rng() % 17;
        const unsigned universe = 2 + rng() % 5;
        const unsigned capacity = 1 + rng() % 4;
        std::vector<unsigned> pages;
        for (std::size_t i = 0; i < len; ++i) pages.push_back(rng() % universe);

        MinFaultOracle oracle(pages, capacity);
        const unsigned optimum = oracle.min_faults();
        const Trace t = trace_from_pages(pages);
        const auto belady = run_simulation(t, demand_options(capacity, EvictKind::Belady));
        REQUIRE(belady.far_faults == optimum);

        const auto lru = run_simulation(t, demand_options(capacity, EvictKind::Lru));
        const auto rnd = run_simulation(t, demand_options(capacity, EvictKind::Random, round));
        REQUIRE(lru.far_faults >= optimum);
        REQUIRE(rnd.far_faults >= optimum);
    }
}

TEST_CASE("thrash ledger counts events, not unique pages") {
    ThrashingLedger ledger;
    CHECK(thrash_count(ledger) == 0);
    ledger.note_eviction(5);
    ledger.note_migration_in(5);
    ledger.note_eviction(5);
    ledger.note_migration_in(5);
    CHECK(thrash_count(ledger) == 2);
    CHECK(ledger.thrashed.size() == 1);
    // T stays within the set of ever-evicted pages.
    for (PageId p : ledger.thrashed) CHECK(ledger.evicted.count(p) == 1);
}

TEST_CASE("baseline tree+LRU never beats demand Belady on thrashing") {
    const Trace t = synthesize_trace(PatternLabel::LinearReuse, 128, 1024, 7);
    const std::size_t cap = capacity_for_oversubscription(t, 1.25);

    SimOptions baseline = demand_options(cap, EvictKind::Lru);
    baseline.prefetch = PrefetchKind::Tree;
    const auto base = run_simulation(t, baseline);

    const auto belady = run_simulation(t, demand_options(cap, EvictKind::Belady));
    CHECK(base.pages_thrashed >= belady.pages_thrashed);
}

TEST_CASE("belady refuses to pair with a prefetcher") {
    const Trace t = trace_from_pages({0, 1, 2});
    SimOptions opt = demand_options(2, EvictKind::Belady);
    opt.prefetch = PrefetchKind::Tree;
    CHECK_THROWS_AS(run_simulation(t, opt), ConfigError);
}

TEST_CASE("runs are deterministic for fixed inputs") {
    const Trace t = synthesize_trace(PatternLabel::RandomReuse, 64, 2000, 11);
    const std::size_t cap = capacity_for_oversubscription(t, 1.25);
    for (EvictKind e : {EvictKind::Lru, EvictKind::Random, EvictKind::Chain}) {
        SimOptions opt = demand_options(cap, e, 77);
        opt.prefetch = PrefetchKind::Tree;
        const auto a = run_simulation(t, opt);
        const auto b = run_simulation(t, opt);
        CHECK(a.far_faults == b.far_faults);
        CHECK(a.pages_thrashed == b.pages_thrashed);
        CHECK(a.total_cycles == b.total_cycles);
        CHECK(a.prefetches_issued == b.prefetches_issued);
    }
}

TEST_CASE("hard-pinned pages stay on the host and use zero-copy") {
    Trace t = trace_from_pages({7, 7, 7, 1});
    SimOptions opt = demand_options(2, EvictKind::Lru);
    opt.hard_pinned = {7};
    const auto m = run_simulation(t, opt);
    CHECK(m.zero_copy_accesses == 3);
    CHECK(m.far_faults == 1);
    CHECK(m.migrations_in == 1);
}

TEST_CASE("soft-pinned pages migrate after the read threshold") {
    // Threshold 3: three zero-copy touches, the fourth access faults and migrates.
    Trace t = trace_from_pages({4, 4, 4, 4, 4});
    SimOptions opt = demand_options(2, EvictKind::Lru);
    opt.soft_pinned = {4};
    opt.soft_pin_threshold = 3;
    const auto m = run_simulation(t, opt);
    CHECK(m.zero_copy_accesses == 3);
    CHECK(m.far_faults == 1);
    CHECK(m.hits == 1);
}

namespace {

// Minimal observer: one prediction per access, never prefetches.
struct CountingObserver final : AccessObserver {
    Actions on_access(const MemoryAccess&, std::size_t, const DeviceMemoryState&) override {
        Actions a;
        a.predictions = 1;
        return a;
    }
};

}  // namespace

TEST_CASE("ipc proxy is non-increasing in prediction overhead") {
    const Trace t = synthesize_trace(PatternLabel::LinearStreaming, 64, 512, 0);
    auto run_with_overhead = [&](double us) {
        SimOptions opt = demand_options(64, EvictKind::Lru);
        opt.timing.prediction_overhead_us = us;
        PolicyPair pair = make_rule_policies(opt);
        pair.observer = std::make_shared<CountingObserver>();
        return run_simulation(t, opt, std::move(pair));
    };
    const auto low = run_with_overhead(1.0);
    const auto high = run_with_overhead(100.0);
    CHECK(low.predictions == high.predictions);
    CHECK(low.far_faults == high.far_faults);
    CHECK(high.ipc_proxy < low.ipc_proxy);
}

TEST_CASE("tree prefetching reports useful-prefetch counts within bounds") {
    const Trace t = synthesize_trace(PatternLabel::LinearStreaming, 256, 2048, 0);
    SimOptions opt = demand_options(256, EvictKind::Lru);
    opt.prefetch = PrefetchKind::Tree;
    const auto m = run_simulation(t, opt);
    CHECK(m.prefetches_issued > 0);
    CHECK(m.prefetch_useful <= m.prefetches_issued);
    // Streaming with room for the whole set: prefetching removes most faults.
    CHECK(m.far_faults < 256);
}

TEST_CASE("residency never exceeds capacity under randomized runs") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 30; ++round) {
        const auto label = static_cast<PatternLabel>(rng() % kPatternCount);
        const Trace t = synthesize_trace(label, 64 + rng() % 128, 500 + rng() % 1500, rng());
        const std::size_t cap = 1 + rng() % 96;
        SimOptions opt = demand_options(cap, EvictKind::Lru, rng());
        opt.prefetch = (rng() % 2 == 0) ? PrefetchKind::Tree : PrefetchKind::None;
        opt.tree_preevict = rng() % 2 == 0;
        Simulator sim(t, opt, make_rule_policies(opt));
        while (!sim.done()) {
            sim.step();
            REQUIRE(sim.state().resident.size() <= cap);
        }
    }
}

TEST_CASE("dirty writeback charges interconnect cycles when enabled") {
    Trace t;
    for (std::size_t i = 0; i < 3; ++i) {
        MemoryAccess a;
        a.cycle = i;
        a.vaddr = static_cast<std::uint64_t>(i) << PageGeometry::page_shift;
        a.is_write = i == 0;  // page 0 becomes dirty
        t.accesses.push_back(a);
    }
    SimOptions off = demand_options(2, EvictKind::Lru);
    SimOptions on = off;
    on.writeback_dirty = true;
    const auto base = run_simulation(t, off);
    const auto wb = run_simulation(t, on);
    CHECK(wb.total_cycles == base.total_cycles + off.timing.interconnect_cycles);
}
