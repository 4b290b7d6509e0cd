#pragma once

#include <array>
#include <deque>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "uvmsim/errors.hpp"
#include "uvmsim/pattern_label.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

// One basic-block migration, tagged with the kernel segment it occurred in.
struct MigrationEvent {
    std::uint64_t block = 0;
    std::uint32_t kernel = 0;
};

inline constexpr unsigned kMinClassifyWindow = 4;

// Classifies one window of basic-block migration traffic. Linearity is the
// fraction of consecutive block deltas equal to +1; a window is Linear* at or
// above `linear_threshold`, Random* at or below `random_threshold`, Mixed*
// in between. The Reuse variant fires when any block migrates again in a
// later kernel segment, judged over the window plus the supplied history.
inline PatternLabel classify_window(std::span<const MigrationEvent> window,
                                    std::span<const MigrationEvent> history = {},
                                    double linear_threshold = 0.75,
                                    double random_threshold = 0.25) {
    if (window.size() < kMinClassifyWindow) {
        throw InsufficientWindowError("classify_window: need at least 4 migrations");
    }
    std::size_t unit = 0;
    for (std::size_t i = 1; i < window.size(); ++i) {
        if (window[i].block == window[i - 1].block + 1) ++unit;
    }
    const double linearity = static_cast<double>(unit) / static_cast<double>(window.size() - 1);

    std::unordered_map<std::uint64_t, std::uint32_t> first_kernel;
    bool reuse = false;
    auto scan = [&](std::span<const MigrationEvent> events) {
        for (const auto& e : events) {
            auto [it, inserted] = first_kernel.emplace(e.block, e.kernel);
            if (!inserted && it->second != e.kernel) reuse = true;
        }
    };
    scan(history);
    scan(window);

    if (linearity >= linear_threshold) {
        return reuse ? PatternLabel::LinearReuse : PatternLabel::LinearStreaming;
    }
    if (linearity <= random_threshold) {
        return reuse ? PatternLabel::RandomReuse : PatternLabel::Random;
    }
    return reuse ? PatternLabel::MixedReuse : PatternLabel::MixedIrregular;
}

// Streaming front-end for the classifier: deduplicates consecutive block ids
// from the migration stream, tracks kernel segments, and keeps a bounded
// history of past windows for reuse detection.
class PatternTracker {
public:
    explicit PatternTracker(unsigned window_events = 64, unsigned history_windows = 8,
                            double linear_threshold = 0.75, double random_threshold = 0.25)
        : window_events_(window_events),
          history_limit_(static_cast<std::size_t>(history_windows) * window_events),
          linear_threshold_(linear_threshold),
          random_threshold_(random_threshold) {}

    void note_migration(PageId page) {
        const auto block = PageGeometry::block_of(page);
        if (!window_.empty() && window_.back().block == block &&
            window_.back().kernel == kernel_) {
            return;  // consecutive duplicate
        }
        if (window_.empty() && !history_.empty() && history_.back().block == block &&
            history_.back().kernel == kernel_) {
            return;
        }
        window_.push_back({block, kernel_});
        while (window_.size() > window_events_) {
            history_.push_back(window_.front());
            window_.pop_front();
        }
        while (history_.size() > history_limit_) history_.pop_front();
    }

    void note_kernel_boundary() { ++kernel_; }

    std::size_t window_size() const { return window_.size(); }

    // Refreshes and returns the label; keeps the previous one while the
    // window is still too short.
    PatternLabel classify() {
        if (window_.size() >= kMinClassifyWindow) {
            const std::vector<MigrationEvent> win(window_.begin(), window_.end());
            const std::vector<MigrationEvent> hist(history_.begin(), history_.end());
            label_ = classify_window(win, hist, linear_threshold_, random_threshold_);
        }
        return label_;
    }

    PatternLabel current() const { return label_; }

private:
    unsigned window_events_;
    std::size_t history_limit_;
    double linear_threshold_;
    double random_threshold_;
    std::deque<MigrationEvent> window_;
    std::deque<MigrationEvent> history_;
    std::uint32_t kernel_ = 0;
    PatternLabel label_ = PatternLabel::LinearStreaming;
};

// Pattern-indexed table of predictor weights: lookup is total, a miss
// instantiates fresh weights for that pattern and never touches the others.
template <typename Model>
class ModelTable {
public:
    template <typename Factory>
    Model& model_for(PatternLabel label, Factory&& make) {
        auto& slot = slots_[static_cast<std::size_t>(label)];
        if (!slot) slot = make(label);
        return *slot;
    }

    Model* find(PatternLabel label) {
        return slots_[static_cast<std::size_t>(label)].get();
    }
    const Model* find(PatternLabel label) const {
        return slots_[static_cast<std::size_t>(label)].get();
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& s : slots_) n += s != nullptr;
        return n;
    }

    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            if (slots_[i]) fn(static_cast<PatternLabel>(i), *slots_[i]);
        }
    }

private:
    std::array<std::unique_ptr<Model>, kPatternCount> slots_;
};

}  // namespace uvmsim
