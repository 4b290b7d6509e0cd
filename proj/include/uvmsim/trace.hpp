#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "uvmsim/errors.hpp"
#include "uvmsim/pattern_label.hpp"

namespace uvmsim {

using PageId = std::uint64_t;

// 4KB pages, 64KB basic blocks (unit of prefetching), 2MB chunks.
struct PageGeometry {
    static constexpr std::uint64_t page_bytes = 4096;
    static constexpr unsigned page_shift = 12;
    static constexpr unsigned pages_per_block = 16;
    static constexpr unsigned block_shift = 4;  // page id -> basic block id
    static constexpr unsigned blocks_per_chunk = 32;
    static constexpr unsigned chunk_shift = 5;  // basic block id -> chunk id

    static constexpr PageId page_of(std::uint64_t vaddr) { return vaddr >> page_shift; }
    static constexpr std::uint64_t block_of(PageId page) { return page >> block_shift; }
    static constexpr std::uint64_t chunk_of_block(std::uint64_t block) { return block >> chunk_shift; }
    static constexpr std::uint64_t chunk_of(PageId page) { return chunk_of_block(block_of(page)); }
    static constexpr PageId first_page_of_block(std::uint64_t block) { return block << block_shift; }
};

// One trace record. Traces are sorted non-decreasing by cycle.
struct MemoryAccess {
    std::uint64_t cycle = 0;
    std::uint64_t pc = 0;
    std::uint32_t tb_id = 0;
    std::uint64_t vaddr = 0;
    bool is_write = false;

    PageId page() const { return PageGeometry::page_of(vaddr); }

    bool operator==(const MemoryAccess&) const = default;
};

// Cycle-ordered access stream plus kernel-boundary positions.
// kernel_marks[k] = i means a kernel boundary sits immediately before accesses[i];
// positions are non-decreasing and may equal accesses.size() (trailing boundary).
struct Trace {
    std::vector<MemoryAccess> accesses;
    std::vector<std::size_t> kernel_marks;
    std::uint64_t instruction_count = 0;  // defaults to one instruction per access

    std::size_t size() const { return accesses.size(); }
    bool empty() const { return accesses.empty(); }

    std::uint64_t instructions() const {
        return instruction_count != 0 ? instruction_count : accesses.size();
    }
};

inline std::size_t working_set_size(const Trace& trace) {
    std::set<PageId> pages;
    for (const auto& a : trace.accesses) pages.insert(a.page());
    return pages.size();
}

// Device capacity for an oversubscription level: floor(WSS / level), min 1.
// 125% oversubscription -> capacity = 0.8 x working set.
inline std::size_t capacity_for_oversubscription(const Trace& trace, double level) {
    if (level < 1.0) throw ConfigError("oversubscription level must be >= 1.0");
    const auto wss = static_cast<double>(working_set_size(trace));
    auto cap = static_cast<std::size_t>(wss / level);
    return cap == 0 ? 1 : cap;
}

// Global page-delta stream over the cycle-ordered trace; first element is 0.
inline std::vector<std::int64_t> page_delta_stream(const Trace& trace) {
    if (trace.empty()) throw ConfigError("page_delta_stream: empty trace");
    std::vector<std::int64_t> deltas;
    deltas.reserve(trace.size());
    deltas.push_back(0);
    for (std::size_t i = 1; i < trace.size(); ++i) {
        deltas.push_back(static_cast<std::int64_t>(trace.accesses[i].page()) -
                         static_cast<std::int64_t>(trace.accesses[i - 1].page()));
    }
    return deltas;
}

namespace detail {

inline std::uint64_t parse_u64(std::string_view field, const std::string& where) {
    std::uint64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || field.empty()) {
        throw ParseError(where + ": bad numeric field '" + std::string(field) + "'");
    }
    return value;
}

// Deterministic bounded draw; avoids std::uniform_int_distribution, whose
// output is implementation-defined.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}

}  // namespace detail

// Parses the text trace format: `cycle,pc,tb_id,vaddr,rw` per line, `#` comments,
// a bare `K` as a kernel boundary, optional `#instructions=<N>` header.
inline Trace load_trace(std::istream& in, const std::string& name = "<stream>") {
    Trace trace;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        if (line[0] == '#') {
            constexpr std::string_view header = "#instructions=";
            if (line.rfind(header, 0) == 0) {
                trace.instruction_count = detail::parse_u64(
                    std::string_view(line).substr(header.size()), where);
            }
            continue;
        }
        if (line == "K") {
            trace.kernel_marks.push_back(trace.accesses.size());
            continue;
        }
        MemoryAccess acc;
        std::string_view rest = line;
        std::uint64_t fields[5];
        for (int f = 0; f < 5; ++f) {
            const auto comma = rest.find(',');
            if (f < 4 && comma == std::string_view::npos) {
                throw ParseError(where + ": expected 5 comma-separated fields");
            }
            if (f == 4 && comma != std::string_view::npos) {
                throw ParseError(where + ": trailing fields after rw flag");
            }
            fields[f] = detail::parse_u64(rest.substr(0, comma), where);
            if (comma != std::string_view::npos) rest = rest.substr(comma + 1);
        }
        if (fields[2] > 0xFFFFFFFFull) throw ParseError(where + ": tb_id out of range");
        if (fields[4] > 1) throw ParseError(where + ": rw flag must be 0 or 1");
        acc.cycle = fields[0];
        acc.pc = fields[1];
        acc.tb_id = static_cast<std::uint32_t>(fields[2]);
        acc.vaddr = fields[3];
        acc.is_write = fields[4] == 1;
        if (!trace.accesses.empty() && acc.cycle < trace.accesses.back().cycle) {
            throw ParseError(where + ": not cycle-sorted");
        }
        trace.accesses.push_back(acc);
    }
    if (trace.empty()) throw ParseError(name + ": empty trace");
    return trace;
}

inline Trace load_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open trace file");
    return load_trace(in, path);
}

// Canonical writer; load_trace(save_trace(t)) round-trips byte-exactly.
inline void save_trace(const Trace& trace, std::ostream& out) {
    if (trace.instruction_count != 0 && trace.instruction_count != trace.accesses.size()) {
        out << "#instructions=" << trace.instruction_count << "\n";
    }
    std::size_t mark = 0;
    for (std::size_t i = 0; i <= trace.accesses.size(); ++i) {
        while (mark < trace.kernel_marks.size() && trace.kernel_marks[mark] == i) {
            out << "K\n";
            ++mark;
        }
        if (i == trace.accesses.size()) break;
        const auto& a = trace.accesses[i];
        out << a.cycle << ',' << a.pc << ',' << a.tb_id << ',' << a.vaddr << ','
            << (a.is_write ? 1 : 0) << "\n";
    }
}

inline void save_trace(const Trace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    save_trace(trace, out);
}

namespace detail {

struct SynthEmitter {
    Trace trace;
    std::size_t index = 0;

    void emit(PageId page, std::uint64_t pc, std::uint32_t tb) {
        MemoryAccess acc;
        acc.cycle = index;
        acc.pc = pc;
        acc.tb_id = tb;
        acc.vaddr = (page << PageGeometry::page_shift) | ((index % 16) * 256);
        acc.is_write = (index % 4) == 3;
        trace.accesses.push_back(acc);
        ++index;
    }

    void kernel_boundary() { trace.kernel_marks.push_back(trace.accesses.size()); }
};

// Linear cursor advance punctuated by short random bursts; at basic-block
// granularity this lands between the pure linear and pure random extremes.
inline void emit_mixed_segment(SynthEmitter& em, std::mt19937_64& rng, PageId& cursor,
                               std::size_t pages, std::size_t count, std::uint32_t tb_base) {
    constexpr std::size_t run_len = 128;  // 8 basic blocks
    constexpr std::size_t burst_len = 7;
    std::size_t emitted = 0;
    while (emitted < count) {
        for (std::size_t r = 0; r < run_len && emitted < count; ++r, ++emitted) {
            em.emit(cursor, 0x4000, tb_base + static_cast<std::uint32_t>(em.index / 256));
            cursor = (cursor + 1) % pages;
        }
        for (std::size_t b = 0; b < burst_len && emitted < count; ++b, ++emitted) {
            const PageId page = bounded(rng, pages);
            em.emit(page, 0x5000 + 16 * (page % 8),
                    tb_base + static_cast<std::uint32_t>(em.index / 256));
        }
    }
}

}  // namespace detail

// Deterministic synthetic trace for one of the six access-pattern categories.
// Reuse variants insert kernel-boundary marks between passes so earlier basic
// blocks are revisited across kernels.
inline Trace synthesize_trace(PatternLabel pattern, std::size_t pages, std::size_t accesses,
                              std::uint64_t seed) {
    if (pages < 1 || accesses < 1) {
        throw ConfigError("synthesize_trace: pages and accesses must be >= 1");
    }
    std::mt19937_64 rng(seed);
    detail::SynthEmitter em;
    em.trace.accesses.reserve(accesses);

    switch (pattern) {
        case PatternLabel::LinearStreaming: {
            for (std::size_t i = 0; i < accesses; ++i) {
                const PageId page = accesses >= pages ? (i * pages) / accesses : i;
                em.emit(page, 0x4000, static_cast<std::uint32_t>(i / 256));
            }
            break;
        }
        case PatternLabel::Random: {
            for (std::size_t i = 0; i < accesses; ++i) {
                const PageId page = detail::bounded(rng, pages);
                em.emit(page, 0x5000 + 16 * (page % 8), static_cast<std::uint32_t>(i / 256));
            }
            break;
        }
        case PatternLabel::MixedIrregular: {
            PageId cursor = 0;
            detail::emit_mixed_segment(em, rng, cursor, pages, accesses, 0);
            break;
        }
        case PatternLabel::LinearReuse: {
            std::size_t emitted = 0;
            while (emitted < accesses) {
                if (emitted > 0) em.kernel_boundary();
                for (std::size_t p = 0; p < pages && emitted < accesses; ++p, ++emitted) {
                    em.emit(p, 0x4000, static_cast<std::uint32_t>(emitted / 256));
                }
            }
            break;
        }
        case PatternLabel::RandomReuse: {
            // One seeded permutation revisited every pass: the shuffled order
            // of a pointer-chased list, random to the classifier yet a
            // learnable delta cycle.
            std::vector<PageId> order(pages);
            for (std::size_t p = 0; p < pages; ++p) order[p] = p;
            for (std::size_t p = pages; p > 1; --p) {
                std::swap(order[p - 1], order[detail::bounded(rng, p)]);
            }
            std::size_t emitted = 0;
            while (emitted < accesses) {
                if (emitted > 0) em.kernel_boundary();
                for (std::size_t p = 0; p < pages && emitted < accesses; ++p, ++emitted) {
                    const PageId page = order[p];
                    em.emit(page, 0x5000 + 16 * (page % 8),
                            static_cast<std::uint32_t>(emitted / 256));
                }
            }
            break;
        }
        case PatternLabel::MixedReuse: {
            std::size_t emitted = 0;
            std::uint32_t pass = 0;
            while (emitted < accesses) {
                if (emitted > 0) em.kernel_boundary();
                PageId cursor = 0;
                const std::size_t pass_len = std::min(pages, accesses - emitted);
                detail::emit_mixed_segment(em, rng, cursor, pages, pass_len, pass * 1000);
                emitted += pass_len;
                ++pass;
            }
            break;
        }
    }
    return em.trace;
}

}  // namespace uvmsim
