#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "uvmsim/device_state.hpp"
#include "uvmsim/errors.hpp"
#include "uvmsim/nn/layers.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

struct PredictorConfig {
    unsigned window = 10;  // historical sequence length
    unsigned d_model = 64;
    unsigned layers = 2;
    unsigned heads = 4;
    unsigned ffn = 128;
    unsigned addr_buckets = 1u << 16;  // page id mod 2^16
    unsigned pc_buckets = 1u << 12;
    unsigned tb_buckets = 1u << 12;
    double lr = 0.05;
    double momentum = 0.9;
    double lambda_base = 2.0;  // LUCIR weight, scheduled by class growth
    double mu = 0.5;           // thrashing-term weight in [0, 1]; 0 disables
    unsigned batch_size = 32;
    unsigned group_size = 50000;  // accesses per training group (snapshot cadence)
    unsigned train_epochs = 1;
    unsigned quant_bits = 5;
    double clamp_limit = 16.0;
    bool clamp_forward = false;  // quantization is accounting-only by default
    std::uint64_t seed = 1;

    void validate() const {
        if (window < 2) throw ConfigError("predictor window must be >= 2");
        if (d_model == 0 || layers == 0 || heads == 0 || ffn == 0) {
            throw ConfigError("predictor dimensions must be positive");
        }
        if (d_model % heads != 0) throw ConfigError("d_model must divide by heads");
        if (mu < 0.0 || mu > 1.0) throw ConfigError("mu must lie in [0, 1]");
        if (lambda_base < 0.0) throw ConfigError("lambda_base must be >= 0");
        if (quant_bits == 0 || quant_bits > 16) throw ConfigError("quant_bits must be in [1, 16]");
    }
};

// One training/prediction sample: `window` consecutive accesses and the delta
// that follows them. target page = base page + target delta.
struct AccessWindow {
    std::vector<PageId> pages;
    std::vector<std::int64_t> deltas;
    std::vector<std::uint64_t> pcs;
    std::vector<std::uint32_t> tbs;
    std::int64_t target_delta = 0;
    PageId base_page = 0;

    PageId target_page() const {
        return static_cast<PageId>(static_cast<std::int64_t>(base_page) + target_delta);
    }
    std::size_t length() const { return pages.size(); }
};

inline std::vector<AccessWindow> make_windows(const Trace& trace, unsigned window_len) {
    std::vector<AccessWindow> out;
    if (trace.size() <= window_len) return out;
    const auto deltas = page_delta_stream(trace);
    out.reserve(trace.size() - window_len);
    for (std::size_t i = window_len; i < trace.size(); ++i) {
        AccessWindow w;
        w.pages.reserve(window_len);
        for (std::size_t j = i - window_len; j < i; ++j) {
            const auto& a = trace.accesses[j];
            w.pages.push_back(a.page());
            w.deltas.push_back(deltas[j]);
            w.pcs.push_back(a.pc);
            w.tbs.push_back(a.tb_id);
        }
        w.target_delta = deltas[i];
        w.base_page = trace.accesses[i - 1].page();
        out.push_back(std::move(w));
    }
    return out;
}

// Append-only delta-class dictionary; indices stay dense in [0, K).
class DeltaVocabulary {
public:
    unsigned add_or_get(std::int64_t delta) {
        auto it = index_of_.find(delta);
        if (it != index_of_.end()) return it->second;
        const unsigned idx = static_cast<unsigned>(by_index_.size());
        by_index_.push_back(delta);
        index_of_.emplace(delta, idx);
        return idx;
    }

    std::optional<unsigned> lookup(std::int64_t delta) const {
        auto it = index_of_.find(delta);
        if (it == index_of_.end()) return std::nullopt;
        return it->second;
    }

    std::int64_t delta_of(unsigned index) const { return by_index_.at(index); }
    unsigned size() const { return static_cast<unsigned>(by_index_.size()); }
    const std::vector<std::int64_t>& deltas() const { return by_index_; }

private:
    std::vector<std::int64_t> by_index_;
    std::unordered_map<std::int64_t, unsigned> index_of_;
};

// ---------------------------------------------------------------------------
// Loss terms.

// Standard cross entropy -log p_target.
inline nn::Var loss_ce(const nn::Var& probs, unsigned target_class) {
    return nn::scale(nn::logv(nn::pick(probs, 0, target_class)), -1.0);
}

// Thrashing term: the additive inverse of CE, applied only when the sample's
// target page already sits in E u T; pushes probability mass away from pages
// that have been evicted or have thrashed.
inline nn::Var loss_thrash(const nn::Var& probs, unsigned target_class, PageId target_page,
                           const ThrashingLedger& ledger) {
    if (!ledger.in_evicted_or_thrashed(target_page)) return nn::constant_scalar(0.0);
    return nn::logv(nn::pick(probs, 0, target_class));
}

// LUCIR regulation term: cosine distance between the pre-linear feature of
// the current model and the previous snapshot's feature on the same input.
inline nn::Var loss_lucir(const nn::Var& feature_new, const nn::Var& feature_old) {
    return nn::cosine_distance(feature_new, feature_old);
}

struct TrainMetrics {
    double loss = 0.0;
    double top1 = 0.0;
    unsigned batch = 0;
    unsigned in_thrash_set = 0;  // |S|
    double lambda = 0.0;
};

// Thrashing-aware incremental page-delta predictor: four feature embeddings,
// a regular Transformer block over (address, delta), an irregular block over
// (pc, thread-block id), learnable per-block weights, and a linear head over
// the growing delta-class vocabulary. Keeps a previous-model snapshot for the
// distillation term.
class PredictorModel {
public:
    explicit PredictorModel(PredictorConfig cfg) : cfg_(cfg), rng_(cfg.seed), opt_(cfg.lr, cfg.momentum) {
        cfg_.validate();
        const Eigen::Index d = cfg_.d_model;
        addr_emb_ = nn::Embedding(cfg_.addr_buckets, d, rng_);
        pc_emb_ = nn::Embedding(cfg_.pc_buckets, d, rng_);
        tb_emb_ = nn::Embedding(cfg_.tb_buckets, d, rng_);
        delta_emb_ = nn::parameter(nn::small_uniform(1, d, rng_));  // row 0 = out-of-vocabulary
        pos_regular_ = nn::parameter(nn::small_uniform(cfg_.window, d, rng_));
        pos_irregular_ = nn::parameter(nn::small_uniform(cfg_.window, d, rng_));
        regular_ = nn::TransformerEncoder(cfg_.layers, d, cfg_.heads, cfg_.ffn, rng_);
        irregular_ = nn::TransformerEncoder(cfg_.layers, d, cfg_.heads, cfg_.ffn, rng_);
        weight_regular_ = nn::parameter(nn::Mat::Ones(1, 1));
        weight_irregular_ = nn::parameter(nn::Mat::Ones(1, 1));
        head_weight_ = nn::parameter(nn::Mat::Zero(2 * d, 0));
        collect_params();
    }

    const PredictorConfig& config() const { return cfg_; }
    const DeltaVocabulary& vocab() const { return vocab_; }
    unsigned num_classes() const { return vocab_.size(); }
    const std::vector<nn::Var>& params() const { return params_; }
    const PredictorModel* snapshot() const { return snapshot_.get(); }
    std::uint64_t trained_batches() const { return trained_batches_; }

    nn::Var block_weight_regular() { return weight_regular_; }
    nn::Var block_weight_irregular() { return weight_irregular_; }

    // Grows the output head and the delta embedding; new rows get zero-mean
    // small random values. Existing classes keep their weights bit-for-bit.
    unsigned extend_vocab(std::int64_t delta) {
        const unsigned before = vocab_.size();
        const unsigned idx = vocab_.add_or_get(delta);
        if (vocab_.size() != before) sync_class_count();
        return idx;
    }

    void extend_vocab(std::span<const AccessWindow> batch) {
        for (const auto& w : batch) extend_vocab(w.target_delta);
    }

    struct ForwardResult {
        nn::Var probs;
        nn::Var logits;
        nn::Var feature;  // concatenated pre-linear feature (1 x 2d)
        std::vector<nn::Var> stored;  // activation storage boundaries
    };

    ForwardResult forward_graph(const AccessWindow& window) {
        if (window.length() != cfg_.window) {
            throw ConfigError("access window length mismatch");
        }
        if (vocab_.size() == 0) throw ConfigError("uninitialized delta vocabulary");
        std::vector<Eigen::Index> addr_idx, delta_idx, pc_idx, tb_idx;
        for (std::size_t t = 0; t < cfg_.window; ++t) {
            addr_idx.push_back(static_cast<Eigen::Index>(window.pages[t] % cfg_.addr_buckets));
            const auto cls = vocab_.lookup(window.deltas[t]);
            delta_idx.push_back(cls ? static_cast<Eigen::Index>(*cls + 1) : 0);
            pc_idx.push_back(static_cast<Eigen::Index>(mix64(window.pcs[t]) % cfg_.pc_buckets));
            tb_idx.push_back(static_cast<Eigen::Index>(mix64(window.tbs[t]) % cfg_.tb_buckets));
        }
        ForwardResult fr;
        nn::Var reg_in = nn::add(nn::add(addr_emb_(std::move(addr_idx)),
                                         nn::gather_rows(delta_emb_, std::move(delta_idx))),
                                 pos_regular_);
        nn::Var irr_in = nn::add(nn::add(pc_emb_(std::move(pc_idx)), tb_emb_(std::move(tb_idx))),
                                 pos_irregular_);
        reg_in = maybe_clamp(reg_in, fr);
        irr_in = maybe_clamp(irr_in, fr);
        nn::Var reg_out = maybe_clamp(regular_(reg_in), fr);
        nn::Var irr_out = maybe_clamp(irregular_(irr_in), fr);
        const nn::Var reg_feat = nn::pick_row(reg_out, cfg_.window - 1);
        const nn::Var irr_feat = nn::pick_row(irr_out, cfg_.window - 1);
        fr.feature = maybe_clamp(nn::concat_cols(nn::scale_by(reg_feat, weight_regular_),
                                                 nn::scale_by(irr_feat, weight_irregular_)),
                                 fr);
        fr.logits = maybe_clamp(nn::matmul(fr.feature, head_weight_), fr);
        fr.probs = nn::softmax_rows(fr.logits);
        return fr;
    }

    Eigen::RowVectorXd forward(const AccessWindow& window) {
        return forward_graph(window).probs->value.row(0);
    }

    // k highest-probability (delta, probability) pairs, ties to the lower
    // class index; clips k to the vocabulary size.
    std::vector<std::pair<std::int64_t, double>> predict_topk(const AccessWindow& window,
                                                              unsigned k) {
        const Eigen::RowVectorXd p = forward(window);
        std::vector<unsigned> order(vocab_.size());
        for (unsigned i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](unsigned a, unsigned b) { return p(a) > p(b); });
        std::vector<std::pair<std::int64_t, double>> out;
        const unsigned n = std::min<unsigned>(k, vocab_.size());
        out.reserve(n);
        for (unsigned i = 0; i < n; ++i) out.emplace_back(vocab_.delta_of(order[i]), p(order[i]));
        return out;
    }

    // One SGD step on the composite loss (mean CE + distillation, plus the
    // thrashing term averaged over its subset) over the batch. The vocabulary is
    // extended with unseen target deltas before the step.
    TrainMetrics train_batch(std::span<const AccessWindow> batch, const ThrashingLedger* ledger) {
        if (batch.empty()) throw ConfigError("train_batch: empty batch");
        extend_vocab(batch);

        const double lambda = current_lambda();
        nn::Var ce_sum = nn::constant_scalar(0.0);
        std::vector<nn::Var> thrash_terms;
        unsigned correct = 0;
        for (const auto& window : batch) {
            auto fr = forward_graph(window);
            const unsigned target = *vocab_.lookup(window.target_delta);
            nn::Var sample = loss_ce(fr.probs, target);
            if (snapshot_ && lambda > 0.0) {
                const nn::Var old_feature =
                    nn::constant(snapshot_->forward_graph(window).feature->value);
                sample = nn::add(sample, nn::scale(loss_lucir(fr.feature, old_feature), lambda));
            }
            if (ledger != nullptr && cfg_.mu > 0.0 &&
                ledger->in_evicted_or_thrashed(window.target_page())) {
                thrash_terms.push_back(loss_thrash(fr.probs, target, window.target_page(), *ledger));
            }
            ce_sum = nn::add(ce_sum, sample);
            Eigen::Index argmax = 0;
            fr.probs->value.row(0).maxCoeff(&argmax);
            correct += static_cast<unsigned>(argmax) == target;
        }
        nn::Var total = nn::scale(ce_sum, 1.0 / static_cast<double>(batch.size()));
        if (!thrash_terms.empty()) {
            nn::Var thrash_sum = thrash_terms.front();
            for (std::size_t i = 1; i < thrash_terms.size(); ++i) {
                thrash_sum = nn::add(thrash_sum, thrash_terms[i]);
            }
            total = nn::add(total,
                            nn::scale(thrash_sum, cfg_.mu / static_cast<double>(thrash_terms.size())));
        }
        if (!std::isfinite(total->value(0, 0))) {
            throw TrainingError("non-finite loss at batch " + std::to_string(trained_batches_) +
                                " (K=" + std::to_string(vocab_.size()) + ")");
        }
        opt_.zero_grad(params_);
        nn::backward(total);
        opt_.step(params_);
        ++trained_batches_;

        TrainMetrics m;
        m.loss = total->value(0, 0);
        m.top1 = static_cast<double>(correct) / static_cast<double>(batch.size());
        m.batch = static_cast<unsigned>(batch.size());
        m.in_thrash_set = static_cast<unsigned>(thrash_terms.size());
        m.lambda = lambda;
        return m;
    }

    // The composite loss as a graph, without stepping (used by oracles).
    nn::Var total_loss_graph(std::span<const AccessWindow> batch, const ThrashingLedger* ledger,
                             double lambda, double mu) {
        nn::Var sum = nn::constant_scalar(0.0);
        std::vector<nn::Var> thrash_terms;
        for (const auto& window : batch) {
            auto fr = forward_graph(window);
            const auto cls = vocab_.lookup(window.target_delta);
            if (!cls) throw ConfigError("total_loss: target delta not in vocabulary");
            nn::Var sample = loss_ce(fr.probs, *cls);
            if (snapshot_ && lambda > 0.0) {
                const nn::Var old_feature =
                    nn::constant(snapshot_->forward_graph(window).feature->value);
                sample = nn::add(sample, nn::scale(loss_lucir(fr.feature, old_feature), lambda));
            }
            if (ledger != nullptr && mu > 0.0 &&
                ledger->in_evicted_or_thrashed(window.target_page())) {
                thrash_terms.push_back(loss_thrash(fr.probs, *cls, window.target_page(), *ledger));
            }
            sum = nn::add(sum, sample);
        }
        nn::Var total = nn::scale(sum, 1.0 / static_cast<double>(batch.size()));
        if (!thrash_terms.empty()) {
            nn::Var ts = thrash_terms.front();
            for (std::size_t i = 1; i < thrash_terms.size(); ++i) ts = nn::add(ts, thrash_terms[i]);
            total = nn::add(total, nn::scale(ts, mu / static_cast<double>(thrash_terms.size())));
        }
        return total;
    }

    // Snapshot the current weights as the previous model for distillation.
    void refresh_snapshot() { snapshot_ = clone_without_snapshot(); }

    std::unique_ptr<PredictorModel> clone_without_snapshot() const {
        auto copy = std::make_unique<PredictorModel>(cfg_);
        copy->vocab_ = vocab_;
        copy->sync_class_count();
        for (std::size_t i = 0; i < params_.size(); ++i) {
            copy->params_[i]->value = params_[i]->value;
        }
        return copy;
    }

    // Clamp stored weights to the quantization interval.
    void clamp_parameters() {
        for (const auto& p : params_) {
            p->value = p->value.cwiseMax(-cfg_.clamp_limit).cwiseMin(cfg_.clamp_limit);
        }
    }

    struct FootprintReport {
        std::uint64_t param_values = 0;
        std::uint64_t activation_values = 0;  // one forward+backward, batch shape
        double params_mb = 0.0;
        double activations_mb = 0.0;
        unsigned patterns = 1;
        double total_mb = 0.0;
    };

    // Bytes at the quantized width: each tensor padded up to whole bytes.
    // Activation accounting covers one training batch, forward and backward.
    FootprintReport footprint_report(unsigned patterns) {
        FootprintReport report;
        report.patterns = patterns;
        double param_bytes = 0.0;
        for (const auto& p : params_) {
            report.param_values += static_cast<std::uint64_t>(p->value.size());
            param_bytes += std::ceil(static_cast<double>(p->value.size()) * cfg_.quant_bits / 8.0);
        }
        report.params_mb = param_bytes / 1e6;

        const std::uint64_t per_window = activation_values_per_window();
        report.activation_values =
            2ull * per_window * cfg_.batch_size;  // forward + stored gradients
        report.activations_mb =
            std::ceil(static_cast<double>(report.activation_values) * cfg_.quant_bits / 8.0) / 1e6;
        report.total_mb = eq4_total_mb(report.params_mb, report.activations_mb, patterns);
        return report;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError(path + ": cannot open checkpoint for writing");
        write_bytes(out, kMagic, 8);
        write_u32(out, 1);  // version
        for (std::uint32_t v : {cfg_.window, cfg_.d_model, cfg_.layers, cfg_.heads, cfg_.ffn,
                                cfg_.addr_buckets, cfg_.pc_buckets, cfg_.tb_buckets}) {
            write_u32(out, v);
        }
        write_u32(out, vocab_.size());
        for (const std::int64_t d : vocab_.deltas()) write_bytes(out, &d, 8);
        write_u32(out, static_cast<std::uint32_t>(params_.size()));
        for (const auto& p : params_) {
            write_u32(out, static_cast<std::uint32_t>(p->value.rows()));
            write_u32(out, static_cast<std::uint32_t>(p->value.cols()));
            // row-major little-endian doubles
            for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
                for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
                    const double v = p->value(r, c);
                    write_bytes(out, &v, 8);
                }
            }
        }
    }

    static PredictorModel load(const std::string& path, PredictorConfig base = {}) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError(path + ": cannot open checkpoint");
        char magic[8];
        read_bytes(in, magic, 8);
        if (std::memcmp(magic, kMagic, 8) != 0) throw ConfigError(path + ": bad checkpoint magic");
        if (read_u32(in) != 1) throw ConfigError(path + ": unsupported checkpoint version");
        base.window = read_u32(in);
        base.d_model = read_u32(in);
        base.layers = read_u32(in);
        base.heads = read_u32(in);
        base.ffn = read_u32(in);
        base.addr_buckets = read_u32(in);
        base.pc_buckets = read_u32(in);
        base.tb_buckets = read_u32(in);
        PredictorModel model(base);
        const std::uint32_t k = read_u32(in);
        for (std::uint32_t i = 0; i < k; ++i) {
            std::int64_t d;
            read_bytes(in, &d, 8);
            model.vocab_.add_or_get(d);
        }
        model.sync_class_count();
        const std::uint32_t count = read_u32(in);
        if (count != model.params_.size()) throw ConfigError(path + ": parameter count mismatch");
        for (auto& p : model.params_) {
            const std::uint32_t rows = read_u32(in);
            const std::uint32_t cols = read_u32(in);
            if (rows != p->value.rows() || cols != p->value.cols()) {
                throw ConfigError(path + ": parameter shape mismatch");
            }
            for (std::uint32_t r = 0; r < rows; ++r) {
                for (std::uint32_t c = 0; c < cols; ++c) {
                    double v;
                    read_bytes(in, &v, 8);
                    p->value(r, c) = v;
                }
            }
        }
        return model;
    }

private:
    static constexpr const char kMagic[9] = "UVMPRED1";

    static std::uint64_t mix64(std::uint64_t x) {
        x *= 0x9E3779B97F4A7C15ull;
        x ^= x >> 29;
        return x;
    }

    nn::Var maybe_clamp(nn::Var x, ForwardResult& fr) {
        if (cfg_.clamp_forward) x = nn::clampv(x, -cfg_.clamp_limit, cfg_.clamp_limit);
        fr.stored.push_back(x);
        return x;
    }

    // lambda_base * sqrt(K_old / K_new), the class-growth schedule.
    double current_lambda() const {
        if (!snapshot_ || cfg_.lambda_base == 0.0) return 0.0;
        const double k_old = snapshot_->num_classes();
        const double k_new = std::max(1u, vocab_.size());
        if (k_old == 0.0) return 0.0;
        return cfg_.lambda_base * std::sqrt(k_old / k_new);
    }

    void sync_class_count() {
        const Eigen::Index k = vocab_.size();
        const Eigen::Index d = cfg_.d_model;
        if (delta_emb_->value.rows() < k + 1) {
            const Eigen::Index old_rows = delta_emb_->value.rows();
            delta_emb_->value.conservativeResize(k + 1, d);
            // New delta classes start at the OOV embedding plus a small tie-break
            // jitter: the previous model saw these inputs through row 0, so the
            // incremental step begins near feature-consistent instead of
            // handing the distillation term a structural gap.
            for (Eigen::Index r = old_rows; r < k + 1; ++r) {
                delta_emb_->value.row(r) =
                    delta_emb_->value.row(0) + nn::small_uniform(1, d, rng_, 0.1);
            }
            delta_emb_->grad = nn::Mat();
        }
        if (head_weight_->value.cols() < k) {
            const Eigen::Index old_cols = head_weight_->value.cols();
            head_weight_->value.conservativeResize(2 * d, k);
            head_weight_->value.rightCols(k - old_cols) =
                nn::small_uniform(2 * d, k - old_cols, rng_);
            head_weight_->grad = nn::Mat();
        }
    }

    std::uint64_t activation_values_per_window() {
        if (vocab_.size() == 0) {
            auto probe = clone_without_snapshot();
            probe->extend_vocab(std::int64_t{0});
            return probe->activation_values_per_window();
        }
        AccessWindow dummy;
        dummy.pages.assign(cfg_.window, 0);
        dummy.deltas.assign(cfg_.window, vocab_.delta_of(0));
        dummy.pcs.assign(cfg_.window, 0);
        dummy.tbs.assign(cfg_.window, 0);
        auto fr = forward_graph(dummy);
        // Count every non-parameter node reachable from the output.
        std::unordered_set<nn::Node*> params;
        for (const auto& p : params_) params.insert(p.get());
        std::unordered_set<nn::Node*> seen;
        std::vector<nn::Node*> stack{fr.probs.get()};
        std::uint64_t values = 0;
        while (!stack.empty()) {
            nn::Node* node = stack.back();
            stack.pop_back();
            if (!seen.insert(node).second) continue;
            if (params.count(node) == 0) values += static_cast<std::uint64_t>(node->value.size());
            for (const auto& parent : node->parents) stack.push_back(parent.get());
        }
        return values;
    }

    void collect_params() {
        params_.clear();
        addr_emb_.collect(params_);
        pc_emb_.collect(params_);
        tb_emb_.collect(params_);
        params_.push_back(delta_emb_);
        params_.push_back(pos_regular_);
        params_.push_back(pos_irregular_);
        regular_.collect(params_);
        irregular_.collect(params_);
        params_.push_back(weight_regular_);
        params_.push_back(weight_irregular_);
        params_.push_back(head_weight_);
    }

    static void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
        out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }
    static void write_u32(std::ofstream& out, std::uint32_t v) { write_bytes(out, &v, 4); }
    static void read_bytes(std::ifstream& in, void* p, std::size_t n) {
        if (!in.read(static_cast<char*>(p), static_cast<std::streamsize>(n))) {
            throw ConfigError("checkpoint truncated");
        }
    }
    static std::uint32_t read_u32(std::ifstream& in) {
        std::uint32_t v;
        read_bytes(in, &v, 4);
        return v;
    }

public:
    // Total = (Params x 2 + Acti) x Patterns: current plus previous weights,
    // one set of activations, one model per pattern.
    static double eq4_total_mb(double params_mb, double acti_mb, unsigned patterns) {
        return (params_mb * 2.0 + acti_mb) * static_cast<double>(patterns);
    }

private:
    PredictorConfig cfg_;
    std::mt19937_64 rng_;
    nn::Embedding addr_emb_, pc_emb_, tb_emb_;
    nn::Var delta_emb_;      // (K + 1) x d, row 0 reserved for OOV inputs
    nn::Var pos_regular_, pos_irregular_;
    nn::TransformerEncoder regular_, irregular_;
    nn::Var weight_regular_, weight_irregular_;
    nn::Var head_weight_;    // bias-free output layer, 2d x K
    DeltaVocabulary vocab_;
    std::vector<nn::Var> params_;
    std::unique_ptr<PredictorModel> snapshot_;
    nn::SgdMomentum opt_;
    std::uint64_t trained_batches_ = 0;
};

}  // namespace uvmsim
