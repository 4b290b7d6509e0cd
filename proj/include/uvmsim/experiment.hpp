#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uvmsim/memsim.hpp"
#include "uvmsim/pattern.hpp"
#include "uvmsim/policy_engine.hpp"
#include "uvmsim/predictor.hpp"
#include "uvmsim/trace.hpp"

namespace uvmsim {

using json = nlohmann::json;

struct SynthSpec {
    PatternLabel pattern = PatternLabel::LinearStreaming;
    std::size_t pages = 0;
    std::size_t accesses = 0;
    std::uint64_t seed = 0;
};

// A named trace: either a file on disk or a synthesis recipe.
struct TraceSource {
    std::string name;
    std::string path;               // file source when non-empty
    std::optional<SynthSpec> synth;

    Trace load() const {
        if (synth) return synthesize_trace(synth->pattern, synth->pages, synth->accesses, synth->seed);
        return load_trace(path);
    }
};

struct PolicySpec {
    PrefetchKind prefetch = PrefetchKind::None;
    EvictKind evict = EvictKind::Lru;
    bool oracle_engine = false;

    std::string name() const {
        std::string n = std::string(to_string(prefetch)) + "+";
        n += oracle_engine ? "engine_oracle" : std::string(to_string(evict));
        return n;
    }
};

inline PolicySpec parse_policy(const std::string& token) {
    const auto plus = token.find('+');
    if (plus == std::string::npos) throw ConfigError("policy must look like '<prefetch>+<evict>': " + token);
    const std::string pf = token.substr(0, plus);
    const std::string ev = token.substr(plus + 1);
    PolicySpec spec;
    if (pf == "none") {
        spec.prefetch = PrefetchKind::None;
    } else if (pf == "tree") {
        spec.prefetch = PrefetchKind::Tree;
    } else {
        throw ConfigError("unknown prefetcher '" + pf + "' (none|tree)");
    }
    if (ev == "lru") spec.evict = EvictKind::Lru;
    else if (ev == "random") spec.evict = EvictKind::Random;
    else if (ev == "belady") spec.evict = EvictKind::Belady;
    else if (ev == "chain") spec.evict = EvictKind::Chain;
    else if (ev == "engine") spec.evict = EvictKind::Engine;
    else if (ev == "engine_oracle") {
        spec.evict = EvictKind::Engine;
        spec.oracle_engine = true;
    } else {
        throw ConfigError("unknown evictor '" + ev + "' (lru|random|belady|chain|engine|engine_oracle)");
    }
    return spec;
}

inline SynthSpec parse_synth(const std::string& token) {
    // pattern:pages:accesses:seed
    std::vector<std::string> parts;
    std::stringstream ss(token);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 4) throw ConfigError("synth spec must be pattern:pages:accesses:seed");
    SynthSpec spec;
    const auto label = pattern_from_string(parts[0]);
    if (!label) throw ConfigError("unknown pattern '" + parts[0] + "'");
    spec.pattern = *label;
    spec.pages = std::stoull(parts[1]);
    spec.accesses = std::stoull(parts[2]);
    spec.seed = std::stoull(parts[3]);
    return spec;
}

struct ExperimentConfig {
    std::vector<TraceSource> traces;
    std::vector<double> levels{1.25};
    std::vector<PolicySpec> policies;
    std::string baseline;  // policy name for normalized-IPC columns; optional
    SimOptions sim;
    EngineOptions engine;
    std::string outdir = "reports";

    void validate() const {
        if (traces.empty()) throw ConfigError("no traces configured");
        if (policies.empty()) throw ConfigError("no policies configured");
        for (double level : levels) {
            if (level < 1.0) throw ConfigError("oversubscription level must be >= 1.0");
        }
        if (!baseline.empty()) {
            const bool known = std::any_of(policies.begin(), policies.end(),
                                           [&](const PolicySpec& p) { return p.name() == baseline; });
            if (!known) throw ConfigError("baseline policy '" + baseline + "' not in policy list");
        }
    }
};

// ---------------------------------------------------------------------------
// Key-value config files: `key = value`, '#' comments.

inline std::map<std::string, std::vector<std::string>> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::map<std::string, std::vector<std::string>> kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (!t.empty()) kv[key].push_back(t);
        }
    }
    return kv;
}

inline void apply_predictor_kv(PredictorConfig& cfg,
                               const std::map<std::string, std::vector<std::string>>& kv) {
    auto get = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end() || it->second.empty()) return std::nullopt;
        return it->second.front();
    };
    if (auto v = get("window")) cfg.window = std::stoul(*v);
    if (auto v = get("d_model")) cfg.d_model = std::stoul(*v);
    if (auto v = get("layers")) cfg.layers = std::stoul(*v);
    if (auto v = get("heads")) cfg.heads = std::stoul(*v);
    if (auto v = get("ffn")) cfg.ffn = std::stoul(*v);
    if (auto v = get("addr_buckets")) cfg.addr_buckets = std::stoul(*v);
    if (auto v = get("pc_buckets")) cfg.pc_buckets = std::stoul(*v);
    if (auto v = get("tb_buckets")) cfg.tb_buckets = std::stoul(*v);
    if (auto v = get("lr")) cfg.lr = std::stod(*v);
    if (auto v = get("momentum")) cfg.momentum = std::stod(*v);
    if (auto v = get("lambda_base")) cfg.lambda_base = std::stod(*v);
    if (auto v = get("mu")) cfg.mu = std::stod(*v);
    if (auto v = get("batch_size")) cfg.batch_size = std::stoul(*v);
    if (auto v = get("group_size")) cfg.group_size = std::stoul(*v);
    if (auto v = get("train_epochs")) cfg.train_epochs = std::stoul(*v);
    if (auto v = get("quant_bits")) cfg.quant_bits = std::stoul(*v);
    if (auto v = get("clamp_limit")) cfg.clamp_limit = std::stod(*v);
    if (auto v = get("clamp_forward")) cfg.clamp_forward = *v == "1" || *v == "true";
    if (auto v = get("seed")) cfg.seed = std::stoull(*v);
    cfg.validate();
}

// ---------------------------------------------------------------------------
// Grid runner.

struct CellResult {
    std::string trace;
    std::string policy;
    double level = 0.0;
    std::size_t capacity = 0;
    SimMetrics metrics;
    std::string error;  // non-empty when the cell failed

    bool ok() const { return error.empty(); }
};

struct GridResult {
    std::vector<CellResult> cells;
    std::vector<std::string> report_files;
    std::vector<std::string> summary_files;

    bool all_ok() const {
        return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok(); });
    }
};

namespace detail {

inline std::string format_level(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", level);
    return buf;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline json metrics_to_json(const SimMetrics& m) {
    return json{{"pages_thrashed", m.pages_thrashed},
                {"unique_pages_thrashed", m.unique_pages_thrashed},
                {"far_faults", m.far_faults},
                {"hits", m.hits},
                {"zero_copy_accesses", m.zero_copy_accesses},
                {"migrations_in", m.migrations_in},
                {"migrations_out", m.migrations_out},
                {"prefetches_issued", m.prefetches_issued},
                {"prefetch_useful", m.prefetch_useful},
                {"predictions", m.predictions},
                {"stall_cycles", m.stall_cycles},
                {"total_cycles", m.total_cycles},
                {"prefetch_interconnect_cycles", m.prefetch_interconnect_cycles},
                {"instruction_count", m.instruction_count},
                {"ipc_proxy", m.ipc_proxy}};
}

}  // namespace detail

inline SimMetrics run_cell(const Trace& trace, const PolicySpec& policy, double level,
                           const ExperimentConfig& config, std::size_t* capacity_out = nullptr,
                           std::vector<PatternLabel>* labels_out = nullptr) {
    SimOptions opt = config.sim;
    opt.capacity_pages = capacity_for_oversubscription(trace, level);
    opt.prefetch = policy.prefetch;
    opt.evict = policy.evict;
    if (capacity_out != nullptr) *capacity_out = opt.capacity_pages;
    if (policy.evict == EvictKind::Engine) {
        EngineOptions engine_opt = config.engine;
        engine_opt.oracle = policy.oracle_engine;
        engine_opt.interval_length = opt.interval_length;
        PolicyPair pair = make_engine_policies(engine_opt);
        auto engine = std::static_pointer_cast<PolicyEngine>(pair.observer);
        const SimMetrics m = run_simulation(trace, opt, std::move(pair));
        if (labels_out != nullptr) *labels_out = engine->interval_labels();
        return m;
    }
    return run_simulation(trace, opt, make_rule_policies(opt));
}

// One report per (trace, policy, level) cell plus a per-trace summary CSV.
// Deterministic given the config's seeds; failed cells are recorded and the
// grid keeps going.
inline GridResult run_grid(const ExperimentConfig& config) {
    config.validate();
    std::filesystem::create_directories(config.outdir);
    GridResult result;

    for (const auto& source : config.traces) {
        Trace trace;
        std::string load_error;
        try {
            trace = source.load();
        } catch (const std::exception& e) {
            load_error = e.what();
        }

        std::ostringstream summary;
        summary << "policy,level,capacity_pages,far_faults,pages_thrashed,unique_pages_thrashed,"
                   "prefetches_issued,prefetch_useful,predictions,total_cycles,ipc_proxy";
        const bool normalize = !config.baseline.empty();
        if (normalize) summary << ",ipc_norm";
        summary << "\n";

        std::map<std::string, double> baseline_ipc;  // level string -> ipc
        if (normalize && load_error.empty()) {
            for (double level : config.levels) {
                for (const auto& policy : config.policies) {
                    if (policy.name() != config.baseline) continue;
                    try {
                        const auto m = run_cell(trace, policy, level, config);
                        baseline_ipc[detail::format_level(level)] = m.ipc_proxy;
                    } catch (const std::exception&) {
                        // summary rows fall back to unnormalized output
                    }
                }
            }
        }

        for (double level : config.levels) {
            for (const auto& policy : config.policies) {
                CellResult cell;
                cell.trace = source.name;
                cell.policy = policy.name();
                cell.level = level;
                if (!load_error.empty()) {
                    cell.error = load_error;
                    result.cells.push_back(cell);
                    continue;
                }
                std::vector<PatternLabel> interval_labels;
                try {
                    cell.metrics =
                        run_cell(trace, policy, level, config, &cell.capacity, &interval_labels);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                    result.cells.push_back(cell);
                    continue;
                }

                const std::string level_str = detail::format_level(level);
                json report;
                report["trace"] = source.name;
                report["policy"] = cell.policy;
                report["oversubscription"] = level_str;
                report["capacity_pages"] = cell.capacity;
                report["working_set_pages"] = working_set_size(trace);
                report["metrics"] = detail::metrics_to_json(cell.metrics);
                if (!interval_labels.empty()) {
                    std::vector<std::string> names;
                    names.reserve(interval_labels.size());
                    for (auto l : interval_labels) names.emplace_back(to_string(l));
                    report["pattern_labels_per_interval"] = names;
                }
                report["config"] = {
                    {"seed", config.sim.seed},
                    {"interval_length", config.sim.interval_length},
                    {"soft_pin_threshold", config.sim.soft_pin_threshold},
                    {"tree_preevict", config.sim.tree_preevict},
                    {"prediction_overhead_us", config.sim.timing.prediction_overhead_us},
                    {"core_mhz", config.sim.timing.core_mhz},
                };
                const std::string file = config.outdir + "/" + source.name + "_" + cell.policy +
                                         "_" + level_str + ".json";
                std::ofstream out(file);
                out << report.dump(2) << "\n";
                result.report_files.push_back(file);

                summary << cell.policy << ',' << level_str << ',' << cell.capacity << ','
                        << cell.metrics.far_faults << ',' << cell.metrics.pages_thrashed << ','
                        << cell.metrics.unique_pages_thrashed << ','
                        << cell.metrics.prefetches_issued << ',' << cell.metrics.prefetch_useful
                        << ',' << cell.metrics.predictions << ',' << cell.metrics.total_cycles
                        << ',' << detail::format_double(cell.metrics.ipc_proxy);
                if (normalize) {
                    auto it = baseline_ipc.find(level_str);
                    const double norm = (it != baseline_ipc.end() && it->second > 0.0)
                                            ? cell.metrics.ipc_proxy / it->second
                                            : 0.0;
                    summary << ',' << detail::format_double(norm);
                }
                summary << "\n";
                result.cells.push_back(cell);
            }
        }

        const std::string summary_file = config.outdir + "/" + source.name + "_summary.csv";
        std::ofstream out(summary_file);
        out << summary.str();
        result.summary_files.push_back(summary_file);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Predictor evaluation: online train/predict alternation vs offline
// random-half training, single model vs pattern-aware model table.

enum class EvalMode { Online, Offline };
enum class EvalScheme { Single, PatternAware };

struct EvalReport {
    std::vector<double> group_accuracy;  // online: one entry per predicted group
    double overall = 0.0;
    std::size_t windows = 0;
    std::size_t groups = 0;
    std::string mode;
    std::string scheme;

    json to_json() const {
        return json{{"mode", mode},
                    {"scheme", scheme},
                    {"windows", windows},
                    {"groups", groups},
                    {"overall_top1", overall},
                    {"group_top1", group_accuracy}};
    }
};

namespace detail {

// Pattern label per window, derived from the access stream the same way the
// engine sees it (block events with kernel marks).
inline std::vector<PatternLabel> label_windows(const Trace& trace, unsigned window_len,
                                               unsigned interval_length) {
    PatternTracker tracker(interval_length);
    std::vector<PatternLabel> per_access;
    per_access.reserve(trace.size());
    std::size_t mark = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        while (mark < trace.kernel_marks.size() && trace.kernel_marks[mark] == i) {
            tracker.note_kernel_boundary();
            ++mark;
        }
        tracker.note_migration(trace.accesses[i].page());
        per_access.push_back(tracker.classify());
    }
    std::vector<PatternLabel> labels;
    if (trace.size() > window_len) {
        labels.reserve(trace.size() - window_len);
        for (std::size_t k = 0; k + window_len < trace.size(); ++k) {
            labels.push_back(per_access[k + window_len - 1]);
        }
    }
    return labels;
}

struct EvalModels {
    ModelTable<PredictorModel> table;
    PredictorConfig cfg;

    PredictorModel& for_label(PatternLabel label) {
        return table.model_for(label, [&](PatternLabel l) {
            PredictorConfig c = cfg;
            c.seed = cfg.seed + static_cast<std::uint64_t>(l) * 7919;
            return std::make_unique<PredictorModel>(c);
        });
    }

    void refresh_all() {
        table.for_each([](PatternLabel, PredictorModel& m) { m.refresh_snapshot(); });
    }
};

inline void train_span(EvalModels& models, std::span<const AccessWindow> windows,
                       std::span<const PatternLabel> labels, unsigned epochs) {
    const unsigned batch = models.cfg.batch_size;
    for (unsigned e = 0; e < epochs; ++e) {
        std::array<std::vector<AccessWindow>, kPatternCount> buckets;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            auto& bucket = buckets[static_cast<int>(labels[i])];
            bucket.push_back(windows[i]);
            if (bucket.size() == batch) {
                models.for_label(labels[i]).train_batch(bucket, nullptr);
                bucket.clear();
            }
        }
        for (int l = 0; l < kPatternCount; ++l) {
            if (!buckets[l].empty()) {
                models.for_label(static_cast<PatternLabel>(l)).train_batch(buckets[l], nullptr);
            }
        }
    }
}

inline double predict_span(EvalModels& models, std::span<const AccessWindow> windows,
                           std::span<const PatternLabel> labels) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        PredictorModel& model = models.for_label(labels[i]);
        if (model.num_classes() == 0) continue;
        const auto top = model.predict_topk(windows[i], 1);
        hits += !top.empty() && top[0].first == windows[i].target_delta;
    }
    return windows.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(windows.size());
}

}  // namespace detail

inline EvalReport eval_predictor(const Trace& trace, EvalMode mode, EvalScheme scheme,
                                 PredictorConfig cfg, unsigned interval_length = 64,
                                 unsigned offline_epochs = 3) {
    cfg.validate();
    const auto windows = make_windows(trace, cfg.window);
    const std::size_t group = cfg.group_size;
    if (mode == EvalMode::Online && windows.size() < 2 * group) {
        throw ConfigError("trace too short for online evaluation: need at least two groups");
    }
    if (windows.size() < 2) throw ConfigError("trace too short to build prediction windows");

    std::vector<PatternLabel> labels(windows.size(), PatternLabel::LinearStreaming);
    if (scheme == EvalScheme::PatternAware) {
        labels = detail::label_windows(trace, cfg.window, interval_length);
    }

    detail::EvalModels models;
    models.cfg = cfg;

    EvalReport report;
    report.windows = windows.size();
    report.mode = mode == EvalMode::Online ? "online" : "offline";
    report.scheme = scheme == EvalScheme::Single ? "single" : "pattern_aware";

    if (mode == EvalMode::Online) {
        // Train on group g, predict group g+1, repeat.
        std::size_t hits_scale = 0;
        double weighted = 0.0;
        for (std::size_t start = 0; start + group < windows.size(); start += group) {
            const auto train = std::span(windows).subspan(start, group);
            const auto train_labels = std::span(labels).subspan(start, group);
            detail::train_span(models, train, train_labels, cfg.train_epochs);
            models.refresh_all();

            const std::size_t next = start + group;
            const std::size_t count = std::min(group, windows.size() - next);
            const auto predict = std::span(windows).subspan(next, count);
            const auto predict_labels = std::span(labels).subspan(next, count);
            const double acc = detail::predict_span(models, predict, predict_labels);
            report.group_accuracy.push_back(acc);
            weighted += acc * static_cast<double>(count);
            hits_scale += count;
        }
        report.groups = report.group_accuracy.size() + 1;
        report.overall = hits_scale == 0 ? 0.0 : weighted / static_cast<double>(hits_scale);
    } else {
        // Random half for training, then predict the whole trace in order.
        std::vector<std::size_t> order(windows.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(cfg.seed ^ 0x5EEDull);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[detail::bounded(rng, i)]);
        }
        std::vector<AccessWindow> train;
        std::vector<PatternLabel> train_labels;
        for (std::size_t i = 0; i < order.size() / 2; ++i) {
            train.push_back(windows[order[i]]);
            train_labels.push_back(labels[order[i]]);
        }
        detail::train_span(models, train, train_labels, offline_epochs);
        report.groups = 1;
        report.overall = detail::predict_span(models, windows, labels);
        report.group_accuracy.push_back(report.overall);
    }
    return report;
}

}  // namespace uvmsim
