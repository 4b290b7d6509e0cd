// Test-only oracles, independent of the simulator's policy implementations.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "uvmsim/trace.hpp"

namespace uvmsim::testing {

// Minimum demand-load fault count over every possible eviction schedule,
// by memoized exhaustive search. Intended for small instances only
// (pages <= ~8, capacity <= ~4, length <= ~20).
class MinFaultOracle {
public:
    MinFaultOracle(std::vector<unsigned> page_seq, unsigned capacity)
        : seq_(std::move(page_seq)), capacity_(capacity) {}

    unsigned min_faults() { return solve(0, 0); }

private:
    unsigned solve(std::size_t i, std::uint32_t resident) {
        if (i == seq_.size()) return 0;
        const auto key = std::make_pair(i, resident);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;

        const std::uint32_t bit = 1u << seq_[i];
        unsigned best;
        if (resident & bit) {
            best = solve(i + 1, resident);
        } else if (popcount(resident) < capacity_) {
            best = 1 + solve(i + 1, resident | bit);
        } else {
            best = ~0u;
            for (unsigned q = 0; q < 32; ++q) {
                const std::uint32_t qbit = 1u << q;
                if (!(resident & qbit)) continue;
                const unsigned f = 1 + solve(i + 1, (resident & ~qbit) | bit);
                if (f < best) best = f;
            }
        }
        memo_.emplace(key, best);
        return best;
    }

    static unsigned popcount(std::uint32_t v) {
        unsigned c = 0;
        while (v) {
            v &= v - 1;
            ++c;
        }
        return c;
    }

    std::vector<unsigned> seq_;
    unsigned capacity_;
    std::map<std::pair<std::size_t, std::uint32_t>, unsigned> memo_;
};

inline Trace trace_from_pages(const std::vector<unsigned>& pages) {
    Trace t;
    for (std::size_t i = 0; i < pages.size(); ++i) {
        MemoryAccess a;
        a.cycle = i;
        a.vaddr = static_cast<std::uint64_t>(pages[i]) << PageGeometry::page_shift;
        t.accesses.push_back(a);
    }
    return t;
}

}  // namespace uvmsim::testing
