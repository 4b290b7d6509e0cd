// Shared fixtures for the incremental-learning experiments.
#pragma once

#include <algorithm>
#include <vector>

#include "uvmsim/predictor.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim::testing {

// Fixed pseudo-random delta cycle of length 32 over a small alphabet: the
// recent delta history identifies the cycle position, so the next delta is
// predictable while the stream still has 32 distinct window types.
inline Trace delta_cycle_trace(const std::vector<std::int64_t>& alphabet, std::size_t length,
                               PageId start_page, std::uint64_t pc, std::uint64_t cycle_seed) {
    std::mt19937_64 rng(cycle_seed);
    std::vector<std::int64_t> cycle;
    for (int k = 0; k < 32; ++k) cycle.push_back(alphabet[rng() % alphabet.size()]);
    Trace t;
    PageId page = start_page;
    for (std::size_t i = 0; i < length; ++i) {
        MemoryAccess a;
        a.cycle = i;
        a.vaddr = (page & 0xFFFFFF) << PageGeometry::page_shift;
        a.pc = pc;
        a.tb_id = 1;
        t.accesses.push_back(a);
        page = static_cast<PageId>(static_cast<std::int64_t>(page) + cycle[i % 32]);
    }
    return t;
}

// Phase A: regular walk over {+1,+2,+4,+8} near the low address region.
// Phase B: a second program phase in a far region with four unseen classes.
inline Trace class_growth_phase_a(std::size_t length = 600) {
    return delta_cycle_trace({1, 2, 4, 8}, length, 100000, 0x4000, 7);
}
inline Trace class_growth_phase_b(std::size_t length = 600) {
    return delta_cycle_trace({-3, 5, -7, 9}, length, 4000000, 0x8000, 9);
}

inline PredictorConfig retention_config(std::uint64_t seed, double lambda_base) {
    PredictorConfig cfg;
    cfg.d_model = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ffn = 32;
    cfg.addr_buckets = 64;
    cfg.pc_buckets = 32;
    cfg.tb_buckets = 32;
    cfg.lr = 0.003;
    cfg.batch_size = 16;
    cfg.seed = seed;
    cfg.lambda_base = lambda_base;
    return cfg;
}

inline double top1_accuracy(PredictorModel& model, const std::vector<AccessWindow>& windows,
                            std::size_t begin, std::size_t end) {
    unsigned hit = 0;
    for (std::size_t i = begin; i < end; ++i) {
        hit += model.predict_topk(windows[i], 1)[0].first == windows[i].target_delta;
    }
    return static_cast<double>(hit) / static_cast<double>(end - begin);
}

struct RetentionResult {
    double phase_a_before = 0.0;
    double phase_a_after = 0.0;
    double phase_b_after = 0.0;
};

// Train on phase A, snapshot, train on phase B, and report how much of the
// phase-A mapping survives.
inline RetentionResult run_retention_experiment(std::uint64_t seed, double lambda_base,
                                                unsigned steps_a = 400, unsigned steps_b = 40) {
    const Trace ta = class_growth_phase_a();
    const Trace tb = class_growth_phase_b();
    const auto wa = make_windows(ta, 10);
    const auto wb = make_windows(tb, 10);
    PredictorModel model(retention_config(seed, lambda_base));
    for (unsigned s = 0; s < steps_a; ++s) {
        model.train_batch(std::span(wa).subspan((s * 16) % 560, 16), nullptr);
    }
    RetentionResult r;
    r.phase_a_before = top1_accuracy(model, wa, 400, 560);
    model.refresh_snapshot();
    for (unsigned s = 0; s < steps_b; ++s) {
        model.train_batch(std::span(wb).subspan((s * 16) % 560, 16), nullptr);
    }
    r.phase_a_after = top1_accuracy(model, wa, 400, 560);
    r.phase_b_after = top1_accuracy(model, wb, 400, 560);
    return r;
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace uvmsim::testing
