#include <catch2/catch.hpp>

#include <algorithm>
#include <list>
#include <random>

#include "uvmsim/policies.hpp"

using namespace uvmsim;

namespace {

ChunkTree tree_with_blocks(unsigned block_count, std::initializer_list<unsigned> full_blocks) {
    ChunkTree tree(0, block_count);
    for (unsigned b : full_blocks) {
        const PageId base = PageGeometry::first_page_of_block(b);
        for (unsigned i = 0; i < PageGeometry::pages_per_block; ++i) tree.set_page(base + i, true);
    }
    return tree;
}

std::vector<PageId> pages_of_blocks(std::initializer_list<unsigned> blocks) {
    std::vector<PageId> pages;
    for (unsigned b : blocks) {
        const PageId base = PageGeometry::first_page_of_block(b);
        for (unsigned i = 0; i < PageGeometry::pages_per_block; ++i) pages.push_back(base + i);
    }
    std::sort(pages.begin(), pages.end());
    return pages;
}

}  // namespace

TEST_CASE("ChunkTree keeps parent sums consistent under random mutation") {
    std::mt19937_64 rng(17);
    ChunkTree tree(3, 32);
    const PageId base = PageGeometry::first_page_of_block(tree.base_block());
    for (int step = 0; step < 2000; ++step) {
        const PageId page = base + rng() % (32 * PageGeometry::pages_per_block);
        tree.set_page(page, rng() % 2 == 0);
        REQUIRE(tree.parent_sums_consistent());
    }
    CHECK(tree.valid_bytes() <= 32u * ChunkTree::block_bytes);
}

TEST_CASE("ChunkTree pads small allocations with zero-capacity phantom leaves") {
    ChunkTree tree(0, 5);
    CHECK(tree.padded_leaves() == 8);
    CHECK(tree.node_capacity(1) == 5 * ChunkTree::block_bytes);
    // A node spanning only phantom leaves has no capacity and never triggers.
    CHECK(tree.node_capacity(7) == 0);
}

TEST_CASE("tree_prefetch fills only the faulting basic block from an empty tree") {
    ChunkTree tree(0, 8);  // the 512KB shape
    const PageId fault = 3;
    const auto got = tree_prefetch(tree, std::vector<PageId>{fault});
    CHECK(got == pages_of_blocks({0}));
}

TEST_CASE("tree_prefetch cascades when a node crosses strictly above 50%") {
    // Blocks 0-3 valid out of 8; a fault in block 4 makes five valid leaves
    // under the 512KB node (5/8 > 50%), pulling in the remaining three blocks.
    ChunkTree tree = tree_with_blocks(8, {0, 1, 2, 3});
    const PageId fault = PageGeometry::first_page_of_block(4);
    const auto got = tree_prefetch(tree, std::vector<PageId>{fault});
    CHECK(got == pages_of_blocks({4, 5, 6, 7}));
}

TEST_CASE("tree_prefetch returns nothing when every block is already valid") {
    ChunkTree tree = tree_with_blocks(8, {0, 1, 2, 3, 4, 5, 6, 7});
    const auto got = tree_prefetch(tree, std::vector<PageId>{0});
    CHECK(got.empty());
}

TEST_CASE("tree_prefetch is idempotent once its result is applied") {
    ChunkTree tree = tree_with_blocks(8, {0, 1, 2});
    const std::vector<PageId> faults{PageGeometry::first_page_of_block(3)};
    auto first = tree_prefetch(tree, faults);
    for (const PageId page : first) tree.set_page(page, true);
    const auto second = tree_prefetch(tree, faults);
    CHECK(second.empty());
}

TEST_CASE("tree_preevict boundary is strict") {
    SECTION("exactly 50% does not trigger") {
        ChunkTree tree = tree_with_blocks(4, {0, 1});
        CHECK(tree_preevict(tree).empty());
    }
    SECTION("one of four blocks valid returns that block") {
        ChunkTree tree = tree_with_blocks(4, {2});
        CHECK(tree_preevict(tree) == pages_of_blocks({2}));
    }
    SECTION("empty tree yields nothing") {
        ChunkTree tree(0, 4);
        CHECK(tree_preevict(tree).empty());
    }
}

namespace {

DeviceMemoryState state_with(std::initializer_list<std::pair<PageId, std::uint64_t>> pages) {
    DeviceMemoryState state;
    state.capacity_pages = pages.size();
    for (auto [page, t] : pages) {
        state.insert_resident(page, t);
    }
    return state;
}

}  // namespace

TEST_CASE("lru_select picks the oldest access, ties to lowest page id") {
    auto state = state_with({{0, 5}, {1, 3}, {2, 9}});
    CHECK(lru_select(state) == 1);

    auto tied = state_with({{0, 4}, {1, 4}, {2, 4}});
    CHECK(lru_select(tied) == 0);
}

TEST_CASE("lru_select matches a reference list-based LRU") {
    std::mt19937_64 rng(23);
    DeviceMemoryState state;
    state.capacity_pages = 16;
    std::list<PageId> order;  // front = most recent
    std::uint64_t cycle = 0;
    for (int step = 0; step < 4000; ++step) {
        const PageId page = rng() % 16;
        ++cycle;  // distinct cycles keep the reference order total
        if (!state.is_resident(page)) {
            state.insert_resident(page, cycle);
        } else {
            state.touch(page, cycle);
        }
        order.remove(page);
        order.push_front(page);
        if (step % 7 == 0) {
            REQUIRE(lru_select(state) == order.back());
        }
    }
}

TEST_CASE("random_select behavior") {
    SECTION("single resident page is returned") {
        auto state = state_with({{42, 1}});
        std::mt19937_64 rng(0);
        CHECK(random_select(state, rng) == 42);
    }
    SECTION("deterministic for a fixed seed stream") {
        auto state = state_with({{0, 1}, {1, 1}, {2, 1}, {3, 1}});
        std::mt19937_64 a(99), b(99);
        for (int i = 0; i < 100; ++i) REQUIRE(random_select(state, a) == random_select(state, b));
    }
    SECTION("draws are near-uniform over four pages") {
        auto state = state_with({{0, 1}, {1, 1}, {2, 1}, {3, 1}});
        std::mt19937_64 rng(7);
        std::array<int, 4> freq{};
        const int n = 10000;
        for (int i = 0; i < n; ++i) ++freq[random_select(state, rng)];
        const double expect = n / 4.0;
        const double sigma = std::sqrt(n * 0.25 * 0.75);
        for (int f : freq) CHECK(std::abs(f - expect) < 5 * sigma);
    }
    SECTION("no unpinned page raises") {
        DeviceMemoryState state;
        state.capacity_pages = 1;
        std::mt19937_64 rng(0);
        CHECK_THROWS_AS(random_select(state, rng), NoVictimError);
    }
}

namespace {

Trace trace_of_pages(std::initializer_list<PageId> pages) {
    Trace t;
    std::uint64_t cycle = 0;
    for (PageId p : pages) {
        MemoryAccess a;
        a.cycle = cycle++;
        a.vaddr = p << PageGeometry::page_shift;
        t.accesses.push_back(a);
    }
    return t;
}

}  // namespace

TEST_CASE("belady_select prefers pages never used again") {
    auto state = state_with({{0, 1}, {1, 1}});
    const Trace future = trace_of_pages({2, 2, 0});
    CHECK(belady_select(state, std::span(future.accesses)) == 1);
}

TEST_CASE("belady_select tie-breaks by lowest page id") {
    auto state = state_with({{3, 1}, {5, 1}, {9, 1}});
    const Trace future = trace_of_pages({100});
    CHECK(belady_select(state, std::span(future.accesses)) == 3);
}

TEST_CASE("BeladyEvictor matches the naive clairvoyant scan") {
    std::mt19937_64 rng(31);
    for (int round = 0; round < 50; ++round) {
        Trace t;
        const std::size_t len = 10 + rng() % 30;
        for (std::size_t i = 0; i < len; ++i) {
            MemoryAccess a;
            a.cycle = i;
            a.vaddr = (rng() % 6) << PageGeometry::page_shift;
            t.accesses.push_back(a);
        }
        BeladyEvictor evictor;
        evictor.bind_trace(t);
        DeviceMemoryState state;
        state.capacity_pages = 3;
        for (std::size_t i = 0; i < len; ++i) {
            const PageId page = t.accesses[i].page();
            if (!state.is_resident(page)) {
                if (state.resident.size() == state.capacity_pages) {
                    const auto future = std::span(t.accesses).subspan(i + 1);
                    const PageId naive = belady_select(state, future);
                    const PageId indexed = evictor.select_victim(state, i);
                    REQUIRE(indexed == naive);
                    state.erase_resident(indexed);
                }
                state.insert_resident(page, i);
            } else {
                state.touch(page, i);
            }
        }
    }
}

TEST_CASE("chain_advance shifts partitions definitionally") {
    PageSetChain chain(64);
    chain.insert_new(30);  // c
    chain.advance();
    chain.insert_new(20);  // b
    chain.advance();       // 30 -> old, 20 -> middle
    chain.insert_new(10);  // a
    REQUIRE(chain.partition_of(10) == PageSetChain::kNew);
    REQUIRE(chain.partition_of(20) == PageSetChain::kMiddle);
    REQUIRE(chain.partition_of(30) == PageSetChain::kOld);

    chain.advance();
    CHECK(chain.partition(PageSetChain::kNew).empty());
    CHECK(chain.partition(PageSetChain::kMiddle) == std::set<PageId>{10});
    CHECK(chain.partition(PageSetChain::kOld) == std::set<PageId>{20, 30});

    PageSetChain empty(64);
    empty.advance();
    CHECK(empty.size() == 0);
}

TEST_CASE("chain interval trips after exactly 64 faults") {
    PageSetChain chain(64);
    int advances = 0;
    for (int fault = 0; fault < 64; ++fault) {
        if (chain.record_fault()) {
            chain.advance();
            ++advances;
        }
    }
    CHECK(advances == 1);
    CHECK(chain.fault_counter() == 0);
}

TEST_CASE("ChainEvictor searches old partition first, LRU within") {
    ChainEvictor evictor(4);
    DeviceMemoryState state;
    state.capacity_pages = 4;
    for (PageId p : {0, 1, 2, 3}) {
        state.insert_resident(p, p + 1);
        evictor.on_migrate_in(p, false);
    }
    evictor.on_interval();  // {0,1,2,3} -> middle
    evictor.on_interval();  // -> old
    state.insert_resident(9, 50);
    evictor.on_migrate_in(9, false);  // 9 lands in new
    // Oldest partition holds 0..3; LRU there is page 0.
    CHECK(evictor.select_victim(state, 0) == 0);
    // Promoting 0 by access leaves 1 as the old-partition LRU.
    evictor.on_access(0, 60);
    state.touch(0, 60);
    CHECK(evictor.select_victim(state, 0) == 1);
}
