#pragma once

#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "uvmsim/chunk_tree.hpp"
#include "uvmsim/device_state.hpp"
#include "uvmsim/page_set_chain.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

namespace detail {

inline bool evictable(const DeviceMemoryState& state, PageId page) {
    return !state.is_hard_pinned(page);
}

}  // namespace detail

// Oldest last_access wins; ties break to the lowest page id (resident set is
// ordered, so the first minimum seen is the lowest id).
inline PageId lru_select(const DeviceMemoryState& state) {
    bool found = false;
    PageId victim = 0;
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (const PageId page : state.resident) {
        if (!detail::evictable(state, page)) continue;
        auto it = state.last_access.find(page);
        const std::uint64_t t = it == state.last_access.end() ? 0 : it->second;
        if (!found || t < best) {
            found = true;
            best = t;
            victim = page;
        }
    }
    if (!found) throw NoVictimError("lru_select: no unpinned resident page");
    return victim;
}

// Uniform over the resident unpinned pages, deterministic per seed stream.
inline PageId random_select(const DeviceMemoryState& state, std::mt19937_64& rng) {
    std::vector<PageId> pool;
    pool.reserve(state.resident.size());
    for (const PageId page : state.resident) {
        if (detail::evictable(state, page)) pool.push_back(page);
    }
    if (pool.empty()) throw NoVictimError("random_select: no unpinned resident page");
    return pool[detail::bounded(rng, pool.size())];
}

// Clairvoyant MIN choice: the resident page whose next use lies farthest in
// the future; never-used-again pages win outright, ties go to the lowest id.
inline PageId belady_select(const DeviceMemoryState& state, std::span<const MemoryAccess> future) {
    bool found = false;
    PageId victim = 0;
    std::uint64_t best = 0;
    for (const PageId page : state.resident) {
        if (!detail::evictable(state, page)) continue;
        std::uint64_t next = std::numeric_limits<std::uint64_t>::max();
        for (std::size_t i = 0; i < future.size(); ++i) {
            if (future[i].page() == page) {
                next = i;
                break;
            }
        }
        if (!found || next > best) {
            found = true;
            best = next;
            victim = page;
        }
    }
    if (!found) throw NoVictimError("belady_select: no unpinned resident page");
    return victim;
}

// Advances the chain per the interval contract; exposed standalone so the
// shift semantics can be exercised directly.
inline void chain_advance(PageSetChain& chain) { chain.advance(); }

// ---------------------------------------------------------------------------
// Policy interfaces driven by the simulator.

class Evictor {
public:
    virtual ~Evictor() = default;
    virtual std::string_view name() const = 0;
    // Called once before the run for oracle policies that need the full trace.
    virtual void bind_trace(const Trace&) {}
    virtual void on_access(PageId, std::uint64_t /*cycle*/) {}
    virtual void on_migrate_in(PageId, bool /*prefetched*/) {}
    virtual void on_evict(PageId) {}
    virtual void on_interval() {}
    // access_index = position of the in-flight access within the bound trace.
    virtual PageId select_victim(const DeviceMemoryState& state, std::size_t access_index) = 0;
    virtual bool supports_prefetching() const { return true; }
};

class LruEvictor final : public Evictor {
public:
    std::string_view name() const override { return "lru"; }
    PageId select_victim(const DeviceMemoryState& state, std::size_t) override {
        return lru_select(state);
    }
};

class RandomEvictor final : public Evictor {
public:
    explicit RandomEvictor(std::uint64_t seed) : rng_(seed) {}
    std::string_view name() const override { return "random"; }
    PageId select_victim(const DeviceMemoryState& state, std::size_t) override {
        return random_select(state, rng_);
    }

private:
    std::mt19937_64 rng_;
};

// Indexed Belady MIN. Keeps per-page occurrence lists with monotone cursors;
// equivalent to the naive scan over the remaining trace (checked in tests).
class BeladyEvictor final : public Evictor {
public:
    std::string_view name() const override { return "belady"; }
    bool supports_prefetching() const override { return false; }

    void bind_trace(const Trace& trace) override {
        occurrences_.clear();
        cursors_.clear();
        for (std::size_t i = 0; i < trace.size(); ++i) {
            occurrences_[trace.accesses[i].page()].push_back(i);
        }
    }

    PageId select_victim(const DeviceMemoryState& state, std::size_t access_index) override {
        bool found = false;
        PageId victim = 0;
        std::uint64_t best = 0;
        for (const PageId page : state.resident) {
            if (!detail::evictable(state, page)) continue;
            const std::uint64_t next = next_use(page, access_index);
            if (!found || next > best) {
                found = true;
                best = next;
                victim = page;
            }
        }
        if (!found) throw NoVictimError("belady: no unpinned resident page");
        return victim;
    }

private:
    std::uint64_t next_use(PageId page, std::size_t after) {
        auto it = occurrences_.find(page);
        if (it == occurrences_.end()) return std::numeric_limits<std::uint64_t>::max();
        const auto& occ = it->second;
        std::size_t& cur = cursors_[page];
        while (cur < occ.size() && occ[cur] <= after) ++cur;
        return cur < occ.size() ? occ[cur] : std::numeric_limits<std::uint64_t>::max();
    }

    std::unordered_map<PageId, std::vector<std::size_t>> occurrences_;
    std::unordered_map<PageId, std::size_t> cursors_;
};

// HPE-style chain evictor: oldest non-empty partition first, LRU within it.
class ChainEvictor final : public Evictor {
public:
    explicit ChainEvictor(unsigned interval_length = 64) : chain_(interval_length) {}
    std::string_view name() const override { return "chain"; }

    void on_access(PageId page, std::uint64_t) override { chain_.insert_new(page); }
    void on_migrate_in(PageId page, bool) override { chain_.insert_new(page); }
    void on_evict(PageId page) override { chain_.remove(page); }
    void on_interval() override { chain_.advance(); }

    PageId select_victim(const DeviceMemoryState& state, std::size_t) override {
        for (auto part : {PageSetChain::kOld, PageSetChain::kMiddle, PageSetChain::kNew}) {
            bool found = false;
            PageId victim = 0;
            std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
            for (const PageId page : chain_.partition(part)) {
                if (!state.is_resident(page) || !detail::evictable(state, page)) continue;
                auto it = state.last_access.find(page);
                const std::uint64_t t = it == state.last_access.end() ? 0 : it->second;
                if (!found || t < best) {
                    found = true;
                    best = t;
                    victim = page;
                }
            }
            if (found) return victim;
        }
        // Chain lost track of every resident page; fall back to global LRU.
        return lru_select(state);
    }

    const PageSetChain& chain() const { return chain_; }

private:
    PageSetChain chain_;
};

class Prefetcher {
public:
    virtual ~Prefetcher() = default;
    virtual std::string_view name() const = 0;
    // Prefetch candidates after the demand migrations of one same-cycle fault
    // batch; `faulted` pages are already resident.
    virtual std::vector<PageId> on_fault_batch(const DeviceMemoryState& state,
                                               std::span<const PageId> faulted) = 0;
    // Pre-eviction candidates after a demand eviction; empty by default.
    virtual std::vector<PageId> after_eviction(const DeviceMemoryState&, PageId /*victim*/) {
        return {};
    }
};

class NonePrefetcher final : public Prefetcher {
public:
    std::string_view name() const override { return "none"; }
    std::vector<PageId> on_fault_batch(const DeviceMemoryState&, std::span<const PageId>) override {
        return {};
    }
};

class TreePrefetcher final : public Prefetcher {
public:
    explicit TreePrefetcher(bool preevict = false) : preevict_(preevict) {}
    std::string_view name() const override { return "tree"; }

    std::vector<PageId> on_fault_batch(const DeviceMemoryState& state,
                                       std::span<const PageId> faulted) override {
        // Group the batch by chunk and apply the threshold rule per tree.
        std::unordered_map<std::uint64_t, std::vector<PageId>> by_chunk;
        for (const PageId page : faulted) by_chunk[PageGeometry::chunk_of(page)].push_back(page);
        std::vector<PageId> out;
        for (const auto& [chunk, pages] : by_chunk) {
            const ChunkTree* tree = state.find_tree(chunk);
            if (tree == nullptr) continue;
            const auto extra = tree_prefetch(*tree, pages);
            out.insert(out.end(), extra.begin(), extra.end());
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<PageId> after_eviction(const DeviceMemoryState& state, PageId victim) override {
        if (!preevict_) return {};
        const ChunkTree* tree = state.find_tree(PageGeometry::chunk_of(victim));
        if (tree == nullptr) return {};
        return tree_preevict(*tree);
    }

private:
    bool preevict_;
};

}  // namespace uvmsim
