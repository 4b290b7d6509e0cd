#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "uvmsim/trace.hpp"

namespace uvmsim {

// Prediction frequency table: 1024 entries as a 16-way set-associative cache
// over 64 sets. One entry covers a basic block: a 48-bit block tag plus a
// 6-bit saturating counter per page. 1024 x (48 + 96) bits = 18KB exactly.
class PredictionFrequencyTable {
public:
    static constexpr unsigned kWays = 16;
    static constexpr unsigned kSets = 64;
    static constexpr unsigned kCounterBits = 6;
    static constexpr unsigned kCounterMax = (1u << kCounterBits) - 1;  // 63
    static constexpr unsigned kTagBits = 48;
    static constexpr std::uint64_t kTagMask = (1ull << kTagBits) - 1;

    static constexpr std::size_t storage_bits() {
        return static_cast<std::size_t>(kSets) * kWays *
               (kTagBits + kCounterBits * PageGeometry::pages_per_block);
    }
    static constexpr std::size_t storage_bytes() { return storage_bits() / 8; }

    // Fixed multiplicative hash over the basic-block id.
    static unsigned set_index(std::uint64_t block) {
        return static_cast<unsigned>(((block * 0x9E3779B97F4A7C15ull) >> 58) % kSets);
    }

    void record(PageId page) {
        const std::uint64_t block = PageGeometry::block_of(page) & kTagMask;
        const unsigned slot = static_cast<unsigned>(page & (PageGeometry::pages_per_block - 1));
        Entry& entry = entry_for(block);
        auto& counter = entry.counters[slot];
        if (counter < kCounterMax) ++counter;
    }

    void record(std::span<const PageId> pages) {
        for (const PageId page : pages) record(page);
    }

    // Stored counter when the page's block is resident in the table, else -1.
    int frequency_of(PageId page) const {
        const std::uint64_t block = PageGeometry::block_of(page) & kTagMask;
        const Set& set = sets_[set_index(block)];
        for (const Entry& e : set) {
            if (e.valid && e.tag == block) {
                return e.counters[page & (PageGeometry::pages_per_block - 1)];
            }
        }
        return -1;
    }

    void flush() {
        for (auto& set : sets_) {
            for (auto& e : set) e = Entry{};
        }
        ++flush_epoch_;
    }

    std::uint64_t flush_epoch() const { return flush_epoch_; }
    std::uint64_t allocations() const { return allocations_; }
    std::uint64_t replacements() const { return replacements_; }

private:
    struct Entry {
        std::uint64_t tag = 0;
        bool valid = false;
        std::array<std::uint8_t, PageGeometry::pages_per_block> counters{};

        unsigned counter_sum() const {
            unsigned s = 0;
            for (auto c : counters) s += c;
            return s;
        }
    };
    using Set = std::array<Entry, kWays>;

    Entry& entry_for(std::uint64_t block) {
        Set& set = sets_[set_index(block)];
        for (Entry& e : set) {
            if (e.valid && e.tag == block) return e;
        }
        // Miss: fill a free way if one exists; otherwise replace the entry
        // with the lowest counter sum, ties to the lowest way index.
        unsigned victim = kWays;
        for (unsigned w = 0; w < kWays; ++w) {
            if (!set[w].valid) {
                victim = w;
                break;
            }
        }
        if (victim == kWays) {
            unsigned best = ~0u;
            for (unsigned w = 0; w < kWays; ++w) {
                const unsigned sum = set[w].counter_sum();
                if (sum < best) {
                    best = sum;
                    victim = w;
                }
            }
            ++replacements_;
        }
        ++allocations_;
        set[victim] = Entry{};
        set[victim].tag = block;
        set[victim].valid = true;
        return set[victim];
    }

    std::array<Set, kSets> sets_{};
    std::uint64_t flush_epoch_ = 0;
    std::uint64_t allocations_ = 0;
    std::uint64_t replacements_ = 0;
};

}  // namespace uvmsim
