#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "uvmsim/device_state.hpp"
#include "uvmsim/errors.hpp"
#include "uvmsim/policies.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

// Fixed per-event latencies (GPU core cycles unless noted).
struct TimingConfig {
    double core_mhz = 1481.0;
    std::uint64_t page_walk_cycles = 100;
    std::uint64_t interconnect_cycles = 100;
    std::uint64_t dram_cycles = 100;
    std::uint64_t zero_copy_cycles = 200;
    double far_fault_us = 45.0;
    double prediction_overhead_us = 1.0;

    std::uint64_t far_fault_cycles() const {
        return static_cast<std::uint64_t>(std::llround(far_fault_us * core_mhz));
    }
    std::uint64_t prediction_overhead_cycles() const {
        return static_cast<std::uint64_t>(std::llround(prediction_overhead_us * core_mhz));
    }
    std::uint64_t hit_cycles() const { return page_walk_cycles + dram_cycles; }

    void validate() const {
        if (core_mhz <= 0 || page_walk_cycles == 0 || interconnect_cycles == 0 ||
            dram_cycles == 0 || zero_copy_cycles == 0 || far_fault_us <= 0) {
            throw ConfigError("timing latencies must be strictly positive");
        }
        if (prediction_overhead_us < 0) {
            throw ConfigError("prediction overhead must be non-negative");
        }
    }
};

struct SimMetrics {
    std::uint64_t pages_thrashed = 0;  // thrash events (headline number)
    std::uint64_t unique_pages_thrashed = 0;
    std::uint64_t far_faults = 0;
    std::uint64_t hits = 0;
    std::uint64_t zero_copy_accesses = 0;
    std::uint64_t migrations_in = 0;
    std::uint64_t migrations_out = 0;
    std::uint64_t prefetches_issued = 0;
    std::uint64_t prefetch_useful = 0;
    std::uint64_t predictions = 0;
    std::uint64_t stall_cycles = 0;
    std::uint64_t total_cycles = 0;
    std::uint64_t prefetch_interconnect_cycles = 0;  // asynchronous, not stalling
    std::uint64_t instruction_count = 0;
    double ipc_proxy = 0.0;
};

enum class PrefetchKind { None, Tree };
enum class EvictKind { Lru, Random, Belady, Chain, Engine };

inline std::string_view to_string(PrefetchKind k) {
    return k == PrefetchKind::None ? "none" : "tree";
}

inline std::string_view to_string(EvictKind k) {
    switch (k) {
        case EvictKind::Lru: return "lru";
        case EvictKind::Random: return "random";
        case EvictKind::Belady: return "belady";
        case EvictKind::Chain: return "chain";
        case EvictKind::Engine: return "engine";
    }
    return "?";
}

struct SimOptions {
    TimingConfig timing;
    std::size_t capacity_pages = 0;
    PrefetchKind prefetch = PrefetchKind::None;
    EvictKind evict = EvictKind::Lru;
    std::uint64_t seed = 1;
    unsigned interval_length = 64;  // page faults per interval
    unsigned soft_pin_threshold = 3;
    bool tree_preevict = false;
    bool writeback_dirty = false;
    std::set<PageId> hard_pinned;
    std::set<PageId> soft_pinned;
};

// Hook for the prediction-driven engine: sees every completed access and may
// request prefetches; predictions are charged the configured overhead.
class AccessObserver {
public:
    struct Actions {
        std::vector<PageId> prefetches;
        unsigned predictions = 0;
    };

    virtual ~AccessObserver() = default;
    virtual void bind_run(const Trace&, const ThrashingLedger&) {}
    virtual Actions on_access(const MemoryAccess& access, std::size_t index,
                              const DeviceMemoryState& state) = 0;
    virtual void on_demand_fault(PageId) {}
    virtual void on_interval() {}
    // Deferred (budgeted) prefetches issued at an interval boundary.
    virtual std::vector<PageId> on_interval_prefetches(const DeviceMemoryState&) { return {}; }
    virtual void on_run_end() {}
};

struct PolicyPair {
    std::shared_ptr<Prefetcher> prefetcher;
    std::shared_ptr<Evictor> evictor;
    std::shared_ptr<AccessObserver> observer;  // may alias the evictor (engine)
};

inline PolicyPair make_rule_policies(const SimOptions& options) {
    PolicyPair pair;
    switch (options.prefetch) {
        case PrefetchKind::None: pair.prefetcher = std::make_shared<NonePrefetcher>(); break;
        case PrefetchKind::Tree:
            pair.prefetcher = std::make_shared<TreePrefetcher>(options.tree_preevict);
            break;
    }
    switch (options.evict) {
        case EvictKind::Lru: pair.evictor = std::make_shared<LruEvictor>(); break;
        case EvictKind::Random: pair.evictor = std::make_shared<RandomEvictor>(options.seed); break;
        case EvictKind::Belady: pair.evictor = std::make_shared<BeladyEvictor>(); break;
        case EvictKind::Chain:
            pair.evictor = std::make_shared<ChainEvictor>(options.interval_length);
            break;
        case EvictKind::Engine:
            throw ConfigError("engine policy requires an engine-aware factory");
    }
    return pair;
}

enum class AccessOutcome { Hit, ZeroCopy, FarFault };

// Single-owner, single-threaded replay of one trace through one policy pair.
// Deterministic for fixed (trace, options, policies).
class Simulator {
public:
    Simulator(const Trace& trace, const SimOptions& options, PolicyPair policies)
        : trace_(trace), options_(options), policies_(std::move(policies)) {
        options_.timing.validate();
        if (options_.capacity_pages == 0) throw ConfigError("capacity_pages must be >= 1");
        if (trace_.empty()) throw ConfigError("cannot simulate an empty trace");
        if (!policies_.evictor->supports_prefetching() &&
            dynamic_cast<NonePrefetcher*>(policies_.prefetcher.get()) == nullptr) {
            throw ConfigError("belady oracle runs demand-load only; disable prefetching");
        }
        state_.capacity_pages = options_.capacity_pages;
        state_.pinned_host = options_.hard_pinned;
        state_.soft_pinned = options_.soft_pinned;
        policies_.evictor->bind_trace(trace_);
        if (policies_.observer) {
            policies_.observer->bind_run(trace_, ledger_);
            // The engine registers as both evictor and observer; dedupe the
            // interval callback when both point at one object.
            observer_is_evictor_ =
                dynamic_cast<void*>(policies_.observer.get()) ==
                dynamic_cast<void*>(policies_.evictor.get());
        }
        metrics_.instruction_count = trace_.instructions();
    }

    const DeviceMemoryState& state() const { return state_; }
    const ThrashingLedger& ledger() const { return ledger_; }
    const SimMetrics& metrics() const { return metrics_; }
    bool done() const { return next_ >= trace_.size(); }

    AccessOutcome step() {
        const std::size_t i = next_++;
        const MemoryAccess& access = trace_.accesses[i];
        const AccessOutcome outcome = access_page(access, i);

        // A fault batch ends when the cycle advances (MSHR-style coalescing:
        // one far-fault charge per distinct faulting page per cycle batch).
        const bool batch_ends =
            next_ >= trace_.size() || trace_.accesses[next_].cycle != access.cycle;
        if (batch_ends) flush_fault_batch(access.cycle, i);

        if (policies_.observer) {
            auto actions = policies_.observer->on_access(access, i, state_);
            metrics_.predictions += actions.predictions;
            const std::uint64_t overhead =
                actions.predictions * options_.timing.prediction_overhead_cycles();
            metrics_.total_cycles += overhead;
            metrics_.stall_cycles += overhead;
            for (const PageId page : actions.prefetches) {
                prefetch_page(page, access.cycle, i);
            }
        }

        while (faults_since_interval_ >= options_.interval_length) {
            faults_since_interval_ -= options_.interval_length;
            policies_.evictor->on_interval();
            if (policies_.observer) {
                if (!observer_is_evictor_) policies_.observer->on_interval();
                for (const PageId page : policies_.observer->on_interval_prefetches(state_)) {
                    prefetch_page(page, access.cycle, i);
                }
            }
        }
        if (done() && policies_.observer) policies_.observer->on_run_end();
        return outcome;
    }

    SimMetrics run() {
        while (!done()) step();
        metrics_.pages_thrashed = ledger_.thrash_events;
        metrics_.unique_pages_thrashed = ledger_.thrashed.size();
        metrics_.migrations_in = ledger_.migrations_in;
        metrics_.migrations_out = ledger_.migrations_out;
        metrics_.ipc_proxy = metrics_.total_cycles == 0
                                 ? 0.0
                                 : static_cast<double>(metrics_.instruction_count) /
                                       static_cast<double>(metrics_.total_cycles);
        return metrics_;
    }

private:
    AccessOutcome access_page(const MemoryAccess& access, std::size_t index) {
        const PageId page = access.page();
        const std::uint64_t hit_cost = options_.timing.hit_cycles();

        if (state_.is_hard_pinned(page)) {
            charge(options_.timing.zero_copy_cycles, hit_cost);
            ++metrics_.zero_copy_accesses;
            return AccessOutcome::ZeroCopy;
        }
        if (state_.is_resident(page)) {
            charge(hit_cost, hit_cost);
            ++metrics_.hits;
            state_.touch(page, access.cycle);
            if (access.is_write) state_.dirty.insert(page);
            policies_.evictor->on_access(page, access.cycle);
            if (prefetched_pending_.erase(page) != 0) ++metrics_.prefetch_useful;
            return AccessOutcome::Hit;
        }
        if (state_.is_soft_pinned(page) &&
            state_.read_counts[page] < options_.soft_pin_threshold) {
            charge(options_.timing.zero_copy_cycles, hit_cost);
            ++metrics_.zero_copy_accesses;
            ++state_.read_counts[page];
            return AccessOutcome::ZeroCopy;
        }

        // Far fault: migrate on demand, evicting at capacity.
        charge(options_.timing.far_fault_cycles(), hit_cost);
        ++metrics_.far_faults;
        ++faults_since_interval_;
        migrate_in(page, access.cycle, index, /*prefetched=*/false);
        if (access.is_write) state_.dirty.insert(page);
        fault_batch_.push_back(page);
        if (policies_.observer) policies_.observer->on_demand_fault(page);
        return AccessOutcome::FarFault;
    }

    void flush_fault_batch(std::uint64_t cycle, std::size_t index) {
        if (fault_batch_.empty()) return;
        const auto wanted = policies_.prefetcher->on_fault_batch(state_, fault_batch_);
        fault_batch_.clear();
        for (const PageId page : wanted) prefetch_page(page, cycle, index);
    }

    void prefetch_page(PageId page, std::uint64_t cycle, std::size_t index) {
        if (state_.is_resident(page) || state_.is_hard_pinned(page)) return;
        ++metrics_.prefetches_issued;
        metrics_.prefetch_interconnect_cycles += options_.timing.interconnect_cycles;
        migrate_in(page, cycle, index, /*prefetched=*/true);
        prefetched_pending_.insert(page);
    }

    void migrate_in(PageId page, std::uint64_t cycle, std::size_t index, bool prefetched) {
        while (state_.resident.size() >= state_.capacity_pages) evict_one(index);
        state_.insert_resident(page, cycle);
        ledger_.note_migration_in(page);
        policies_.evictor->on_migrate_in(page, prefetched);
        if (state_.resident.size() > state_.capacity_pages) {
            throw std::logic_error("residency exceeded capacity");
        }
    }

    void evict_one(std::size_t index) {
        const PageId victim = policies_.evictor->select_victim(state_, index);
        evict_page(victim);
        // Tree pre-eviction cascade: one pass per triggering eviction.
        for (const PageId page : policies_.prefetcher->after_eviction(state_, victim)) {
            if (state_.is_resident(page)) evict_page(page);
        }
    }

    void evict_page(PageId page) {
        if (options_.writeback_dirty && state_.dirty.count(page) != 0) {
            charge(options_.timing.interconnect_cycles, 0);
        }
        state_.erase_resident(page);
        ledger_.note_eviction(page);
        policies_.evictor->on_evict(page);
        prefetched_pending_.erase(page);
    }

    void charge(std::uint64_t cost, std::uint64_t baseline) {
        metrics_.total_cycles += cost;
        metrics_.stall_cycles += cost > baseline ? cost - baseline : 0;
    }

    const Trace& trace_;
    SimOptions options_;
    PolicyPair policies_;
    DeviceMemoryState state_;
    ThrashingLedger ledger_;
    SimMetrics metrics_;
    std::vector<PageId> fault_batch_;
    std::set<PageId> prefetched_pending_;
    std::size_t next_ = 0;
    unsigned faults_since_interval_ = 0;
    bool observer_is_evictor_ = false;
};

inline SimMetrics run_simulation(const Trace& trace, const SimOptions& options,
                                 PolicyPair policies) {
    Simulator sim(trace, options, std::move(policies));
    return sim.run();
}

inline SimMetrics run_simulation(const Trace& trace, const SimOptions& options) {
    return run_simulation(trace, options, make_rule_policies(options));
}

}  // namespace uvmsim
