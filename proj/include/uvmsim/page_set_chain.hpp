#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <unordered_map>

#include "uvmsim/trace.hpp"

namespace uvmsim {

// Three-partition recency chain (new / middle / old) advanced once per
// interval of page faults. Pages enter "new" on access or migration; every
// advance shifts new -> middle and folds middle into old.
class PageSetChain {
public:
    enum Partition : unsigned { kNew = 0, kMiddle = 1, kOld = 2 };

    explicit PageSetChain(unsigned interval_length = 64) : interval_length_(interval_length) {}

    unsigned interval_length() const { return interval_length_; }
    unsigned fault_counter() const { return fault_counter_; }

    // Returns true when the fault counter reaches the interval length; the
    // caller is expected to advance() (directly or via its interval hook).
    bool record_fault() {
        ++fault_counter_;
        return fault_counter_ >= interval_length_;
    }

    void insert_new(PageId page) {
        remove(page);
        partitions_[kNew].insert(page);
        where_[page] = kNew;
    }

    void remove(PageId page) {
        auto it = where_.find(page);
        if (it == where_.end()) return;
        partitions_[it->second].erase(page);
        where_.erase(it);
    }

    void advance() {
        for (const PageId page : partitions_[kMiddle]) {
            partitions_[kOld].insert(page);
            where_[page] = kOld;
        }
        partitions_[kMiddle].clear();
        for (const PageId page : partitions_[kNew]) {
            partitions_[kMiddle].insert(page);
            where_[page] = kMiddle;
        }
        partitions_[kNew].clear();
        fault_counter_ = 0;
    }

    const std::set<PageId>& partition(Partition p) const { return partitions_[p]; }

    std::optional<Partition> partition_of(PageId page) const {
        auto it = where_.find(page);
        if (it == where_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(PageId page) const { return where_.count(page) != 0; }
    std::size_t size() const { return where_.size(); }

private:
    unsigned interval_length_;
    unsigned fault_counter_ = 0;
    std::array<std::set<PageId>, 3> partitions_;
    std::unordered_map<PageId, Partition> where_;
};

}  // namespace uvmsim
