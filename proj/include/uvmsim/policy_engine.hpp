#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "uvmsim/frequency_table.hpp"
#include "uvmsim/memsim.hpp"
#include "uvmsim/pattern.hpp"
#include "uvmsim/predictor.hpp"

namespace uvmsim {

struct EngineOptions {
    PredictorConfig predictor;
    unsigned interval_length = 64;   // page faults per interval
    unsigned flush_period = 3;       // intervals between frequency-table flushes
    unsigned prefetch_budget = 0;    // 0 = all predicted pages
    bool multi_step = false;         // feed predicted deltas back for lookahead
    unsigned lookahead = 1;
    bool pattern_aware = true;       // per-pattern model table vs a single model
    bool train_online = true;
    bool oracle = false;             // perfect predictor (reads the future)
    double pattern_linear_threshold = 0.75;
    double pattern_random_threshold = 0.25;
};

// Prediction-driven prefetch/eviction engine. Acts as the simulator's evictor
// and access observer at once: every warm access yields a page prediction
// that feeds the frequency table and (budget permitting) an immediate
// prefetch; evictions walk the page set chain from old to new and pick the
// lowest-frequency page.
class PolicyEngine final : public Evictor, public AccessObserver {
public:
    explicit PolicyEngine(EngineOptions options)
        : options_(std::move(options)),
          chain_(options_.interval_length),
          tracker_(options_.interval_length, 8, options_.pattern_linear_threshold,
                   options_.pattern_random_threshold) {
        options_.predictor.validate();
    }

    std::string_view name() const override { return "engine"; }

    // ----- wiring ---------------------------------------------------------

    void bind_trace(const Trace& trace) override { trace_ = &trace; }

    void bind_run(const Trace& trace, const ThrashingLedger& ledger) override {
        trace_ = &trace;
        ledger_ = &ledger;
        next_kernel_mark_ = 0;
    }

    // ----- evictor side ----------------------------------------------------

    void on_access(PageId page, std::uint64_t) override { chain_.insert_new(page); }
    void on_migrate_in(PageId page, bool) override { chain_.insert_new(page); }
    void on_evict(PageId page) override { chain_.remove(page); }

    void on_interval() override {
        chain_advance(chain_);
        ++interval_index_;
        if (interval_index_ % options_.flush_period == 0) table_.flush();
        label_ = tracker_.classify();
        interval_labels_.push_back(label_);
    }

    std::vector<PageId> on_interval_prefetches(const DeviceMemoryState& state) override {
        std::vector<PageId> out;
        if (options_.prefetch_budget > 0) {
            out = select_prefetches(state, options_.prefetch_budget);
        }
        interval_predictions_.clear();
        return out;
    }

    PageId select_victim(const DeviceMemoryState& state, std::size_t) override {
        for (auto part : {PageSetChain::kOld, PageSetChain::kMiddle, PageSetChain::kNew}) {
            bool found = false;
            PageId victim = 0;
            int best_freq = 0;
            std::uint64_t best_age = 0;
            for (const PageId page : chain_.partition(part)) {
                if (!state.is_resident(page) || state.is_hard_pinned(page)) continue;
                const int freq = table_.frequency_of(page);
                auto it = state.last_access.find(page);
                const std::uint64_t age = it == state.last_access.end() ? 0 : it->second;
                if (!found || freq < best_freq || (freq == best_freq && age < best_age)) {
                    found = true;
                    best_freq = freq;
                    best_age = age;
                    victim = page;
                }
            }
            if (found) return victim;
        }
        ++lru_fallbacks_;  // chain holds no resident candidate
        return lru_select(state);
    }

    // ----- observer side ---------------------------------------------------

    Actions on_access(const MemoryAccess& access, std::size_t index,
                      const DeviceMemoryState& state) override {
        Actions actions;
        advance_kernel_marks(index);

        const PageId page = access.page();
        const std::int64_t delta =
            history_.empty() ? 0
                             : static_cast<std::int64_t>(page) -
                                   static_cast<std::int64_t>(history_.back().page);

        if (options_.train_online && !options_.oracle && pending_) {
            pending_->window.target_delta = delta;
            pending_->window.base_page = history_.back().page;
            train_buffers_[static_cast<int>(pending_->label)].push_back(pending_->window);
            maybe_train(pending_->label);
            pending_.reset();
        }

        history_.push_back({page, delta, access.pc, access.tb_id});
        while (history_.size() > options_.predictor.window) history_.pop_front();

        if (history_.size() == options_.predictor.window) {
            const AccessWindow window = assemble_window();
            if (options_.oracle) {
                predict_oracle(index, page, state, actions);
            } else {
                predict_model(window, page, state, actions);
                if (options_.train_online) pending_ = Pending{window, label_};
            }
        }

        accesses_seen_ = index + 1;
        if (options_.train_online && !options_.oracle &&
            accesses_seen_ % options_.predictor.group_size == 0) {
            refresh_snapshots();
        }
        return actions;
    }

    void on_demand_fault(PageId page) override { tracker_.note_migration(page); }

    void on_run_end() override {
        if (options_.train_online && !options_.oracle) flush_train_buffers();
    }

    // ----- prediction bookkeeping -------------------------------------------

    void record_predictions(std::span<const PageId> pages) {
        for (const PageId page : pages) {
            table_.record(page);
            interval_predictions_.push_back(page);
        }
    }

    int frequency_of(PageId page) const { return table_.frequency_of(page); }

    // Highest-frequency first under a finite budget, all predicted pages
    // otherwise; resident and pinned pages never appear.
    std::vector<PageId> select_prefetches(const DeviceMemoryState& state,
                                          unsigned budget) const {
        std::vector<PageId> candidates;
        for (const PageId page : interval_predictions_) {
            if (state.is_resident(page) || state.is_hard_pinned(page)) continue;
            candidates.push_back(page);
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
        if (budget == 0 || candidates.size() <= budget) return candidates;
        std::stable_sort(candidates.begin(), candidates.end(), [&](PageId a, PageId b) {
            return table_.frequency_of(a) > table_.frequency_of(b);
        });
        candidates.resize(budget);
        return candidates;
    }

    const PredictionFrequencyTable& frequency_table() const { return table_; }
    const PageSetChain& chain() const { return chain_; }
    PatternLabel current_label() const { return label_; }
    const std::vector<PatternLabel>& interval_labels() const { return interval_labels_; }
    std::uint64_t lru_fallbacks() const { return lru_fallbacks_; }
    std::uint64_t predictions_issued() const { return predictions_issued_; }
    unsigned interval_index() const { return interval_index_; }

    ModelTable<PredictorModel>& models() { return models_; }

    PredictorModel& model_for(PatternLabel label) {
        return models_.model_for(label, [&](PatternLabel l) {
            PredictorConfig cfg = options_.predictor;
            cfg.seed = options_.predictor.seed + static_cast<std::uint64_t>(l) * 7919;
            return std::make_unique<PredictorModel>(cfg);
        });
    }

private:
    struct Slot {
        PageId page;
        std::int64_t delta;
        std::uint64_t pc;
        std::uint32_t tb;
    };
    struct Pending {
        AccessWindow window;
        PatternLabel label;
    };

    void advance_kernel_marks(std::size_t index) {
        if (trace_ == nullptr) return;
        const auto& marks = trace_->kernel_marks;
        while (next_kernel_mark_ < marks.size() && marks[next_kernel_mark_] <= index) {
            tracker_.note_kernel_boundary();
            ++next_kernel_mark_;
        }
    }

    AccessWindow assemble_window() const {
        AccessWindow w;
        w.pages.reserve(history_.size());
        for (const Slot& s : history_) {
            w.pages.push_back(s.page);
            w.deltas.push_back(s.delta);
            w.pcs.push_back(s.pc);
            w.tbs.push_back(s.tb);
        }
        w.base_page = history_.back().page;
        return w;
    }

    void predict_model(const AccessWindow& window, PageId current, const DeviceMemoryState& state,
                       Actions& actions) {
        PredictorModel& model = options_.pattern_aware ? model_for(label_)
                                                       : model_for(PatternLabel::LinearStreaming);
        if (model.num_classes() == 0) return;  // nothing learned yet
        PageId base = current;
        const unsigned steps = options_.multi_step ? options_.lookahead : 1;
        AccessWindow probe = window;
        for (unsigned s = 0; s < steps; ++s) {
            const auto top = model.predict_topk(probe, 1);
            if (top.empty()) break;
            const PageId predicted =
                static_cast<PageId>(static_cast<std::int64_t>(base) + top[0].first);
            ++actions.predictions;
            ++predictions_issued_;
            table_.record(predicted);
            interval_predictions_.push_back(predicted);
            if (options_.prefetch_budget == 0 && !state.is_resident(predicted) &&
                !state.is_hard_pinned(predicted)) {
                actions.prefetches.push_back(predicted);
            }
            if (s + 1 < steps) {
                // feed the prediction back as the newest history slot
                probe.pages.erase(probe.pages.begin());
                probe.deltas.erase(probe.deltas.begin());
                probe.pcs.erase(probe.pcs.begin());
                probe.tbs.erase(probe.tbs.begin());
                probe.pages.push_back(predicted);
                probe.deltas.push_back(top[0].first);
                probe.pcs.push_back(probe.pcs.back());
                probe.tbs.push_back(probe.tbs.back());
                base = predicted;
            }
        }
    }

    void predict_oracle(std::size_t index, PageId current, const DeviceMemoryState& state,
                        Actions& actions) {
        if (trace_ == nullptr || index + 1 >= trace_->size()) return;
        const PageId next = trace_->accesses[index + 1].page();
        ++actions.predictions;
        ++predictions_issued_;
        table_.record(next);
        interval_predictions_.push_back(next);
        if (options_.prefetch_budget == 0 && next != current && !state.is_resident(next) &&
            !state.is_hard_pinned(next)) {
            actions.prefetches.push_back(next);
        }
    }

    void maybe_train(PatternLabel label) {
        auto& buffer = train_buffers_[static_cast<int>(label)];
        if (buffer.size() < options_.predictor.batch_size) return;
        model_for(label).train_batch(buffer, ledger_);
        buffer.clear();
    }

    void flush_train_buffers() {
        for (int l = 0; l < kPatternCount; ++l) {
            auto& buffer = train_buffers_[l];
            if (!buffer.empty()) {
                model_for(static_cast<PatternLabel>(l)).train_batch(buffer, ledger_);
                buffer.clear();
            }
        }
    }

    void refresh_snapshots() {
        models_.for_each([](PatternLabel, PredictorModel& m) { m.refresh_snapshot(); });
    }

    EngineOptions options_;
    PredictionFrequencyTable table_;
    PageSetChain chain_;
    PatternTracker tracker_;
    ModelTable<PredictorModel> models_;
    PatternLabel label_ = PatternLabel::LinearStreaming;
    std::deque<Slot> history_;
    std::optional<Pending> pending_;
    std::array<std::vector<AccessWindow>, kPatternCount> train_buffers_;
    std::vector<PageId> interval_predictions_;
    std::vector<PatternLabel> interval_labels_;
    const Trace* trace_ = nullptr;
    const ThrashingLedger* ledger_ = nullptr;
    std::size_t next_kernel_mark_ = 0;
    std::uint64_t accesses_seen_ = 0;
    unsigned interval_index_ = 0;
    std::uint64_t lru_fallbacks_ = 0;
    std::uint64_t predictions_issued_ = 0;
};

inline PolicyPair make_engine_policies(const EngineOptions& options) {
    auto engine = std::make_shared<PolicyEngine>(options);
    PolicyPair pair;
    pair.prefetcher = std::make_shared<NonePrefetcher>();
    pair.evictor = engine;
    pair.observer = engine;
    return pair;
}

}  // namespace uvmsim
