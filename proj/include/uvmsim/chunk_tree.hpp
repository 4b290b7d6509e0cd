#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "uvmsim/errors.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

// Full binary occupancy tree over the 64KB basic blocks of one memory chunk.
// Leaves are basic blocks; every node tracks the valid bytes beneath it.
// Trees smaller than a full 2MB chunk pad to the next power-of-two leaf count;
// phantom leaves contribute zero capacity and can never become valid.
class ChunkTree {
public:
    static constexpr std::uint32_t block_bytes = PageGeometry::pages_per_block * PageGeometry::page_bytes;

    ChunkTree() : ChunkTree(0, PageGeometry::blocks_per_chunk) {}

    ChunkTree(std::uint64_t chunk_id, unsigned block_count)
        : chunk_id_(chunk_id), block_count_(block_count) {
        if (block_count == 0 || block_count > PageGeometry::blocks_per_chunk) {
            throw ConfigError("ChunkTree: block count must be in [1, 32]");
        }
        padded_ = std::bit_ceil(block_count);
        valid_bytes_.assign(2 * padded_, 0);
        capacity_.assign(2 * padded_, 0);
        leaf_masks_.assign(block_count_, 0);
        for (unsigned b = 0; b < block_count_; ++b) capacity_[padded_ + b] = block_bytes;
        for (unsigned n = padded_ - 1; n >= 1; --n) {
            capacity_[n] = capacity_[2 * n] + capacity_[2 * n + 1];
        }
    }

    std::uint64_t chunk_id() const { return chunk_id_; }
    unsigned block_count() const { return block_count_; }
    unsigned padded_leaves() const { return padded_; }

    // First basic block id covered by this tree.
    std::uint64_t base_block() const { return chunk_id_ * PageGeometry::blocks_per_chunk; }

    bool covers_page(PageId page) const {
        const auto block = PageGeometry::block_of(page);
        return block >= base_block() && block < base_block() + block_count_;
    }

    bool page_valid(PageId page) const {
        const auto [leaf, bit] = locate(page);
        return (leaf_masks_[leaf] >> bit) & 1u;
    }

    void set_page(PageId page, bool valid) {
        const auto [leaf, bit] = locate(page);
        const std::uint16_t mask = static_cast<std::uint16_t>(1u << bit);
        const bool cur = leaf_masks_[leaf] & mask;
        if (cur == valid) return;
        if (valid) {
            leaf_masks_[leaf] |= mask;
        } else {
            leaf_masks_[leaf] &= static_cast<std::uint16_t>(~mask);
        }
        const std::int64_t d = valid ? static_cast<std::int64_t>(PageGeometry::page_bytes)
                                     : -static_cast<std::int64_t>(PageGeometry::page_bytes);
        for (unsigned n = padded_ + leaf; n >= 1; n /= 2) {
            valid_bytes_[n] = static_cast<std::uint32_t>(static_cast<std::int64_t>(valid_bytes_[n]) + d);
        }
    }

    std::uint32_t node_valid_bytes(unsigned node) const { return valid_bytes_.at(node); }
    std::uint32_t node_capacity(unsigned node) const { return capacity_.at(node); }
    std::uint32_t valid_bytes() const { return valid_bytes_[1]; }

    unsigned node_count() const { return 2 * padded_; }
    bool is_leaf(unsigned node) const { return node >= padded_; }

    // All currently valid pages under `node` (heap index), ascending.
    std::vector<PageId> valid_pages_under(unsigned node) const {
        std::vector<PageId> pages;
        for_each_leaf(node, [&](unsigned leaf) {
            for (unsigned bit = 0; bit < PageGeometry::pages_per_block; ++bit) {
                if ((leaf_masks_[leaf] >> bit) & 1u) pages.push_back(page_at(leaf, bit));
            }
        });
        return pages;
    }

    std::vector<PageId> invalid_pages_under(unsigned node) const {
        std::vector<PageId> pages;
        for_each_leaf(node, [&](unsigned leaf) {
            for (unsigned bit = 0; bit < PageGeometry::pages_per_block; ++bit) {
                if (!((leaf_masks_[leaf] >> bit) & 1u)) pages.push_back(page_at(leaf, bit));
            }
        });
        return pages;
    }

    // Test hook: parent valid bytes must equal the sum of the children's.
    bool parent_sums_consistent() const {
        for (unsigned n = 1; n < padded_; ++n) {
            if (valid_bytes_[n] != valid_bytes_[2 * n] + valid_bytes_[2 * n + 1]) return false;
        }
        for (unsigned b = 0; b < block_count_; ++b) {
            const auto expect = static_cast<std::uint32_t>(std::popcount(leaf_masks_[b])) *
                                static_cast<std::uint32_t>(PageGeometry::page_bytes);
            if (valid_bytes_[padded_ + b] != expect) return false;
        }
        for (unsigned b = block_count_; b < padded_; ++b) {
            if (valid_bytes_[padded_ + b] != 0) return false;
        }
        return true;
    }

private:
    std::pair<unsigned, unsigned> locate(PageId page) const {
        if (!covers_page(page)) throw ConfigError("ChunkTree: page outside chunk");
        const auto block = PageGeometry::block_of(page);
        const auto leaf = static_cast<unsigned>(block - base_block());
        const auto bit = static_cast<unsigned>(page & (PageGeometry::pages_per_block - 1));
        return {leaf, bit};
    }

    PageId page_at(unsigned leaf, unsigned bit) const {
        return PageGeometry::first_page_of_block(base_block() + leaf) + bit;
    }

    template <typename Fn>
    void for_each_leaf(unsigned node, Fn&& fn) const {
        if (node >= padded_) {
            const unsigned leaf = node - padded_;
            if (leaf < block_count_) fn(leaf);
            return;
        }
        for_each_leaf(2 * node, fn);
        for_each_leaf(2 * node + 1, fn);
    }

    std::uint64_t chunk_id_ = 0;
    unsigned block_count_ = 0;
    unsigned padded_ = 0;
    std::vector<std::uint32_t> valid_bytes_;   // heap order, node 1 is the root
    std::vector<std::uint32_t> capacity_;      // phantom leaves excluded
    std::vector<std::uint16_t> leaf_masks_;    // per-block page validity
};

// Neighborhood prefetch rule: fill every faulting page's 64KB basic block, then
// cascade bottom-up -- any non-leaf node strictly above 50% valid pulls in all
// of its remaining non-valid pages. Returns the pages that became newly valid
// on a scratch copy; the caller migrates them and updates the live tree.
inline std::vector<PageId> tree_prefetch(const ChunkTree& tree, std::span<const PageId> faulting) {
    ChunkTree scratch = tree;
    std::vector<PageId> newly;
    auto mark = [&](PageId page) {
        if (!scratch.page_valid(page)) {
            scratch.set_page(page, true);
            newly.push_back(page);
        }
    };
    for (const PageId page : faulting) {
        if (!scratch.covers_page(page)) throw ConfigError("tree_prefetch: page outside chunk");
        const auto block = PageGeometry::block_of(page);
        const PageId base = PageGeometry::first_page_of_block(block);
        for (unsigned i = 0; i < PageGeometry::pages_per_block; ++i) mark(base + i);
    }
    // Bottom-up over non-leaf nodes so a filled node can tip its ancestors.
    for (unsigned node = scratch.padded_leaves() - 1; node >= 1; --node) {
        if (scratch.node_capacity(node) == 0) continue;
        if (2 * scratch.node_valid_bytes(node) > scratch.node_capacity(node)) {
            for (const PageId page : scratch.invalid_pages_under(node)) mark(page);
        }
    }
    std::sort(newly.begin(), newly.end());
    return newly;
}

// Pre-eviction rule, the inverse heuristic: every non-leaf node strictly below
// 50% occupancy surrenders the pages of its remaining valid leaves. Single
// pass over the current state.
inline std::vector<PageId> tree_preevict(const ChunkTree& tree) {
    std::vector<PageId> victims;
    for (unsigned node = 1; node < tree.padded_leaves(); ++node) {
        if (tree.node_capacity(node) == 0) continue;
        if (2 * tree.node_valid_bytes(node) < tree.node_capacity(node)) {
            for (const PageId page : tree.valid_pages_under(node)) victims.push_back(page);
        }
    }
    std::sort(victims.begin(), victims.end());
    victims.erase(std::unique(victims.begin(), victims.end()), victims.end());
    return victims;
}

}  // namespace uvmsim
