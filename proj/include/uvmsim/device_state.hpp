#pragma once

#include <cstdint>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "uvmsim/chunk_tree.hpp"
#include "uvmsim/errors.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

// GPU device-memory residency plus per-page metadata. Residency mutations go
// through insert_resident/erase_resident so the per-chunk occupancy trees stay
// in sync. Hard-pinned pages are never resident.
struct DeviceMemoryState {
    std::size_t capacity_pages = 0;
    std::set<PageId> resident;  // ordered: deterministic iteration and tie-breaks
    std::unordered_map<PageId, std::uint64_t> last_access;
    std::set<PageId> pinned_host;                             // hard pins (zero-copy only)
    std::set<PageId> soft_pinned;                             // delayed-migration pages
    std::unordered_map<PageId, std::uint32_t> read_counts;    // soft-pin read counters
    std::unordered_map<std::uint64_t, ChunkTree> chunk_trees; // keyed by chunk id
    std::unordered_set<PageId> dirty;

    bool is_resident(PageId page) const { return resident.count(page) != 0; }
    bool is_hard_pinned(PageId page) const { return pinned_host.count(page) != 0; }
    bool is_soft_pinned(PageId page) const { return soft_pinned.count(page) != 0; }
    bool at_capacity() const { return resident.size() >= capacity_pages; }

    void touch(PageId page, std::uint64_t cycle) { last_access[page] = cycle; }

    ChunkTree& tree_for_page(PageId page) {
        const auto chunk = PageGeometry::chunk_of(page);
        auto it = chunk_trees.find(chunk);
        if (it == chunk_trees.end()) {
            it = chunk_trees.emplace(chunk, ChunkTree(chunk, PageGeometry::blocks_per_chunk)).first;
        }
        return it->second;
    }

    const ChunkTree* find_tree(std::uint64_t chunk) const {
        auto it = chunk_trees.find(chunk);
        return it == chunk_trees.end() ? nullptr : &it->second;
    }

    void insert_resident(PageId page, std::uint64_t cycle) {
        if (is_hard_pinned(page)) throw ConfigError("cannot migrate a hard-pinned page");
        resident.insert(page);
        touch(page, cycle);
        tree_for_page(page).set_page(page, true);
    }

    void erase_resident(PageId page) {
        resident.erase(page);
        dirty.erase(page);
        tree_for_page(page).set_page(page, false);
    }
};

// Eviction and re-migration bookkeeping. E is every page ever evicted; T the
// subset that has already thrashed (re-migrated after an eviction);
// thrash_events counts every such re-migration, fault- or prefetch-driven.
struct ThrashingLedger {
    std::unordered_set<PageId> evicted;   // E
    std::unordered_set<PageId> thrashed;  // T
    std::uint64_t thrash_events = 0;
    std::uint64_t migrations_in = 0;
    std::uint64_t migrations_out = 0;

    void note_migration_in(PageId page) {
        ++migrations_in;
        if (evicted.count(page)) {
            ++thrash_events;
            thrashed.insert(page);
        }
    }

    void note_eviction(PageId page) {
        ++migrations_out;
        evicted.insert(page);
    }

    bool in_evicted_or_thrashed(PageId page) const {
        return evicted.count(page) != 0 || thrashed.count(page) != 0;
    }
};

inline std::uint64_t thrash_count(const ThrashingLedger& ledger) { return ledger.thrash_events; }

}  // namespace uvmsim
