// uvmsim command-line front end: trace synthesis, simulation grids, predictor
// evaluation, footprint accounting, and report aggregation.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "uvmsim/experiment.hpp"
#include "uvmsim/policy_engine.hpp"

namespace fs = std::filesystem;
using namespace uvmsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

std::string trace_display_name(const TraceSource& source) {
    if (source.synth) {
        std::ostringstream ss;
        ss << to_string(source.synth->pattern) << source.synth->pages << "x"
           << source.synth->accesses << "s" << source.synth->seed;
        return ss.str();
    }
    return fs::path(source.path).stem().string();
}

TraceSource make_source(const std::string& trace_file, const std::string& synth_spec) {
    TraceSource source;
    if (!trace_file.empty() && !synth_spec.empty()) {
        throw ConfigError("give either --trace or --synth, not both");
    }
    if (!trace_file.empty()) {
        source.path = trace_file;
    } else if (!synth_spec.empty()) {
        source.synth = parse_synth(synth_spec);
    } else {
        throw ConfigError("a trace is required: --trace <file> or --synth <spec>");
    }
    source.name = trace_display_name(source);
    return source;
}

void apply_grid_kv(ExperimentConfig& config, const std::string& path) {
    const auto kv = parse_kv_file(path);
    auto one = [&](const char* key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end() || it->second.empty()) return std::nullopt;
        return it->second.front();
    };
    if (auto it = kv.find("trace"); it != kv.end()) {
        for (const auto& token : it->second) {
            TraceSource source;
            if (token.rfind("file:", 0) == 0) {
                source.path = token.substr(5);
            } else if (token.rfind("synth:", 0) == 0) {
                source.synth = parse_synth(token.substr(6));
            } else {
                throw ConfigError("trace entries must start with file: or synth:");
            }
            source.name = trace_display_name(source);
            config.traces.push_back(std::move(source));
        }
    }
    if (auto it = kv.find("levels"); it != kv.end()) {
        config.levels.clear();
        for (const auto& level : it->second) config.levels.push_back(std::stod(level));
    }
    if (auto it = kv.find("policies"); it != kv.end()) {
        for (const auto& token : it->second) config.policies.push_back(parse_policy(token));
    }
    if (auto v = one("baseline")) config.baseline = *v;
    if (auto v = one("outdir")) config.outdir = *v;
    if (auto v = one("seed")) config.sim.seed = std::stoull(*v);
    if (auto v = one("interval")) config.sim.interval_length = std::stoul(*v);
    if (auto v = one("flush_period")) config.engine.flush_period = std::stoul(*v);
    if (auto v = one("prediction_overhead_us")) {
        config.sim.timing.prediction_overhead_us = std::stod(*v);
    }
    if (auto v = one("soft_pin_threshold")) config.sim.soft_pin_threshold = std::stoul(*v);
    if (auto v = one("tree_preevict")) config.sim.tree_preevict = *v == "1" || *v == "true";
    if (auto v = one("prefetch_budget")) {
        config.engine.prefetch_budget = *v == "all" ? 0 : std::stoul(*v);
    }
    if (auto v = one("predictor_config")) {
        apply_predictor_kv(config.engine.predictor, parse_kv_file(*v));
    }
}

int cmd_synth(const std::string& spec, const std::string& output) {
    const SynthSpec synth = parse_synth(spec);
    const Trace trace = synthesize_trace(synth.pattern, synth.pages, synth.accesses, synth.seed);
    if (output.empty() || output == "-") {
        save_trace(trace, std::cout);
    } else {
        save_trace(trace, output);
        std::cout << "wrote " << trace.size() << " accesses (" << working_set_size(trace)
                  << " pages) to " << output << "\n";
    }
    return kExitOk;
}

int cmd_simulate(ExperimentConfig config) {
    const auto result = run_grid(config);
    for (const auto& cell : result.cells) {
        std::cout << cell.trace << " " << cell.policy << " @" << cell.level;
        if (cell.ok()) {
            std::cout << " -> far_faults=" << cell.metrics.far_faults
                      << " pages_thrashed=" << cell.metrics.pages_thrashed
                      << " ipc_proxy=" << detail::format_double(cell.metrics.ipc_proxy) << "\n";
        } else {
            std::cout << " -> ERROR: " << cell.error << "\n";
        }
    }
    for (const auto& file : result.summary_files) std::cout << "summary: " << file << "\n";
    return result.all_ok() ? kExitOk : kExitRuntime;
}

int cmd_eval(const TraceSource& source, const std::string& mode, const std::string& scheme,
             PredictorConfig cfg, unsigned interval, const std::string& output) {
    const Trace trace = source.load();
    const EvalMode m = mode == "online" ? EvalMode::Online : EvalMode::Offline;
    const EvalScheme s = scheme == "single" ? EvalScheme::Single : EvalScheme::PatternAware;
    const EvalReport report = eval_predictor(trace, m, s, cfg, interval);
    json body = report.to_json();
    body["trace"] = source.name;
    if (output.empty() || output == "-") {
        std::cout << body.dump(2) << "\n";
    } else {
        std::ofstream out(output);
        out << body.dump(2) << "\n";
        std::cout << "overall top-1 " << detail::format_double(report.overall) << " -> " << output
                  << "\n";
    }
    return kExitOk;
}

int cmd_footprint(double params_mb, double acti_mb, unsigned patterns,
                  const std::string& predictor_config) {
    if (params_mb >= 0.0 && acti_mb >= 0.0) {
        std::printf("Params %.2fMB x2 + Acti %.2fMB, Patterns %u -> Total %.2fMB\n", params_mb,
                    acti_mb, patterns, PredictorModel::eq4_total_mb(params_mb, acti_mb, patterns));
        return kExitOk;
    }
    PredictorConfig cfg;
    if (!predictor_config.empty()) apply_predictor_kv(cfg, parse_kv_file(predictor_config));
    PredictorModel model(cfg);
    auto report = model.footprint_report(patterns);
    std::printf("parameters: %llu values, %.4f MB at %u-bit\n",
                static_cast<unsigned long long>(report.param_values), report.params_mb,
                cfg.quant_bits);
    std::printf("activations: %llu values, %.4f MB (forward+backward, batch %u)\n",
                static_cast<unsigned long long>(report.activation_values), report.activations_mb,
                cfg.batch_size);
    std::printf("patterns: %u\n", report.patterns);
    std::printf("total: %.4f MB\n", report.total_mb);
    std::printf("prediction frequency table: %zu bytes\n",
                PredictionFrequencyTable::storage_bytes());
    return kExitOk;
}

int cmd_report(const std::string& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::cout << "trace,policy,oversubscription,far_faults,pages_thrashed,unique_pages_thrashed,"
                 "prefetches_issued,predictions,total_cycles,ipc_proxy\n";
    for (const auto& file : files) {
        std::ifstream in(file);
        json body;
        try {
            in >> body;
        } catch (const json::exception&) {
            continue;  // not a cell report
        }
        if (!body.contains("metrics")) continue;
        const auto& m = body["metrics"];
        std::cout << body.value("trace", "?") << ',' << body.value("policy", "?") << ','
                  << body.value("oversubscription", "?") << ',' << m.value("far_faults", 0ull)
                  << ',' << m.value("pages_thrashed", 0ull) << ','
                  << m.value("unique_pages_thrashed", 0ull) << ','
                  << m.value("prefetches_issued", 0ull) << ',' << m.value("predictions", 0ull)
                  << ',' << m.value("total_cycles", 0ull) << ','
                  << detail::format_double(m.value("ipc_proxy", 0.0)) << "\n";
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven GPU unified-memory oversubscription simulator"};
    app.require_subcommand(1);

    // --- synth-trace ---
    auto* synth = app.add_subcommand("synth-trace", "Generate a synthetic access trace");
    std::string synth_pattern, synth_out;
    std::size_t synth_pages = 1024, synth_accesses = 16384;
    std::uint64_t synth_seed = 1;
    synth->add_option("--pattern", synth_pattern, "one of the six access patterns")->required();
    synth->add_option("--pages", synth_pages, "working set size in pages");
    synth->add_option("--accesses", synth_accesses, "number of accesses");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("-o,--output", synth_out, "output file ('-' for stdout)");

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "Run a (trace x policy x level) grid");
    std::string sim_trace, sim_synth, sim_config, sim_prefetch = "none", sim_evict = "lru";
    std::string sim_outdir = "reports", sim_baseline, sim_predictor_config, sim_budget = "all";
    std::string sim_thresholds;
    std::vector<double> sim_levels;
    std::uint64_t sim_seed = 1;
    unsigned sim_interval = 64, sim_flush = 3, sim_softpin = 3;
    double sim_overhead = 1.0;
    bool sim_preevict = false, sim_engine_oracle = false;
    sim->add_option("--trace", sim_trace, "trace file");
    sim->add_option("--synth", sim_synth, "synthetic spec pattern:pages:accesses:seed");
    sim->add_option("--config", sim_config, "grid config file (key = value)");
    sim->add_option("--prefetch", sim_prefetch)->check(CLI::IsMember({"none", "tree"}));
    sim->add_option("--evict", sim_evict)
        ->check(CLI::IsMember({"lru", "random", "belady", "chain", "engine"}));
    sim->add_flag("--engine-oracle", sim_engine_oracle, "perfect predictor inside the engine");
    sim->add_option("--oversub", sim_levels, "oversubscription levels, e.g. 1.25 1.5");
    sim->add_option("--outdir", sim_outdir);
    sim->add_option("--seed", sim_seed);
    sim->add_option("--interval", sim_interval, "page faults per interval");
    sim->add_option("--flush-period", sim_flush, "intervals between table flushes");
    sim->add_option("--prediction-overhead-us", sim_overhead);
    sim->add_option("--prefetch-budget", sim_budget, "N or 'all'");
    sim->add_option("--soft-pin-threshold", sim_softpin);
    sim->add_flag("--tree-preevict", sim_preevict);
    sim->add_option("--baseline", sim_baseline, "policy name for normalized IPC");
    sim->add_option("--predictor-config", sim_predictor_config);
    sim->add_option("--pattern-thresholds", sim_thresholds, "lin,rand classifier thresholds");

    // --- eval-predictor ---
    auto* eval = app.add_subcommand("eval-predictor", "Online/offline top-1 accuracy");
    std::string eval_trace, eval_synth, eval_mode = "online", eval_scheme = "single";
    std::string eval_out, eval_predictor_config;
    double eval_lambda = 2.0, eval_mu = 0.5;
    unsigned eval_group = 50000, eval_interval = 64;
    std::uint64_t eval_seed = 1;
    eval->add_option("--trace", eval_trace);
    eval->add_option("--synth", eval_synth);
    eval->add_option("--mode", eval_mode)->check(CLI::IsMember({"online", "offline"}));
    eval->add_option("--scheme", eval_scheme)->check(CLI::IsMember({"single", "pattern_aware"}));
    eval->add_option("--lambda", eval_lambda, "LUCIR base weight");
    eval->add_option("--mu", eval_mu, "thrashing-term weight");
    eval->add_option("--group-size", eval_group, "accesses per training group");
    eval->add_option("--interval", eval_interval);
    eval->add_option("--seed", eval_seed);
    eval->add_option("--predictor-config", eval_predictor_config);
    eval->add_option("-o,--output", eval_out, "report file ('-' for stdout)");

    // --- footprint ---
    auto* foot = app.add_subcommand("footprint", "Memory footprint accounting");
    double foot_params = -1.0, foot_acti = -1.0;
    unsigned foot_patterns = 3;
    std::string foot_predictor_config;
    foot->add_option("--params-mb", foot_params, "parameter megabytes (direct mode)");
    foot->add_option("--acti-mb", foot_acti, "activation megabytes (direct mode)");
    foot->add_option("--patterns", foot_patterns);
    foot->add_option("--predictor-config", foot_predictor_config);

    // --- report ---
    auto* rep = app.add_subcommand("report", "Aggregate cell reports into CSV");
    std::string rep_dir = "reports";
    rep->add_option("--outdir", rep_dir, "directory of cell report JSONs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (synth->parsed()) {
            std::ostringstream spec;
            spec << synth_pattern << ':' << synth_pages << ':' << synth_accesses << ':'
                 << synth_seed;
            return cmd_synth(spec.str(), synth_out);
        }
        if (sim->parsed()) {
            ExperimentConfig config;
            config.outdir = sim_outdir;
            config.sim.seed = sim_seed;
            config.sim.interval_length = sim_interval;
            config.sim.timing.prediction_overhead_us = sim_overhead;
            config.sim.soft_pin_threshold = sim_softpin;
            config.sim.tree_preevict = sim_preevict;
            config.engine.flush_period = sim_flush;
            config.engine.interval_length = sim_interval;
            config.engine.predictor.seed = sim_seed;
            config.engine.prefetch_budget =
                sim_budget == "all" ? 0 : static_cast<unsigned>(std::stoul(sim_budget));
            if (!sim_thresholds.empty()) {
                const auto comma = sim_thresholds.find(',');
                if (comma == std::string::npos) {
                    throw ConfigError("--pattern-thresholds wants lin,rand");
                }
                config.engine.pattern_linear_threshold =
                    std::stod(sim_thresholds.substr(0, comma));
                config.engine.pattern_random_threshold =
                    std::stod(sim_thresholds.substr(comma + 1));
            }
            if (!sim_predictor_config.empty()) {
                apply_predictor_kv(config.engine.predictor, parse_kv_file(sim_predictor_config));
            }
            if (!sim_config.empty()) apply_grid_kv(config, sim_config);
            if (!sim_trace.empty() || !sim_synth.empty()) {
                config.traces.push_back(make_source(sim_trace, sim_synth));
            }
            if (!sim_levels.empty()) config.levels = sim_levels;
            if (config.policies.empty()) {
                PolicySpec policy = parse_policy(sim_prefetch + "+" + sim_evict);
                policy.oracle_engine = sim_engine_oracle;
                config.policies.push_back(policy);
            }
            if (!sim_baseline.empty()) config.baseline = sim_baseline;
            return cmd_simulate(std::move(config));
        }
        if (eval->parsed()) {
            PredictorConfig cfg;
            cfg.lambda_base = eval_lambda;
            cfg.mu = eval_mu;
            cfg.group_size = eval_group;
            cfg.seed = eval_seed;
            if (!eval_predictor_config.empty()) {
                apply_predictor_kv(cfg, parse_kv_file(eval_predictor_config));
            }
            return cmd_eval(make_source(eval_trace, eval_synth), eval_mode, eval_scheme, cfg,
                            eval_interval, eval_out);
        }
        if (foot->parsed()) {
            if ((foot_params >= 0.0) != (foot_acti >= 0.0)) {
                throw ConfigError("direct mode needs both --params-mb and --acti-mb");
            }
            return cmd_footprint(foot_params, foot_acti, foot_patterns, foot_predictor_config);
        }
        if (rep->parsed()) return cmd_report(rep_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ParseError& e) {
        std::cerr << "trace error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}
