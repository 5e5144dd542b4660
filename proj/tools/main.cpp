// mmrca command-line driver. Every stage reads its inputs from disk and
// persists its outputs, so any stage can be rerun on swapped artifacts.

#include "mmrca/io.hpp"
#include "mmrca/metrics.hpp"
#include "mmrca/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>

namespace {

using namespace mmrca;
using io::Json;
namespace fs = std::filesystem;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Thrown for bad configuration or arguments (exit code 1).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Context {
    pipeline::PipelineConfig config;
    fs::path data;
    fs::path out;
    std::map<std::string, double> timings;
};

// Data layout produced by `simulate` and expected by the other stages.
fs::path metrics_csv(const Context& c) { return c.data / "metrics.csv"; }
fs::path logs_jsonl(const Context& c) { return c.data / "logs.jsonl"; }
fs::path truth_json(const Context& c) { return c.data / "ground_truth.json"; }

template <typename F>
void stage(Context& ctx, const std::string& name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body();
    } catch (const pipeline::StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw pipeline::StageError(name, e.what());
    }
    ctx.timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "[" << name << "] done in " << ctx.timings[name] << " s\n";
}

void write_json(const fs::path& p, const Json& j) { io::write_file(p, j.dump(2) + "\n"); }
Json read_json(const fs::path& p) { return io::parse_json(io::read_file(p), p.string()); }

ModalityPanel load_metric_panel(const Context& ctx, const fs::path& path) {
    auto set = io::panels_from_csv(io::read_file(path));
    return pipeline::aggregate_panel(
        pipeline::select_metric_panel(set.panels, set.metric_names, ctx.config.metric_name), ctx.config.window_size);
}

ModalityPanel load_log_panel(const fs::path& path) {
    auto set = io::panels_from_csv(io::read_file(path));
    return set.panels.front();
}

// ---- stages ----

void do_simulate(Context& ctx) {
    simgen::ScenarioSpec spec;
    try {
        spec = pipeline::scenario_from_config(ctx.config);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("simgen: ") + e.what());
    }
    stage(ctx, "simgen", [&] {
        const auto data = simgen::generate_incident(spec);
        io::write_file(metrics_csv(ctx), io::panels_to_csv(data.metric_panels, data.metric_names));
        io::write_file(logs_jsonl(ctx), io::logs_to_jsonl(data.raw_logs));
        write_json(truth_json(ctx), io::ground_truth_to_json(data));
    });
}

void do_parse(Context& ctx) {
    ModalityPanel metric;
    stage(ctx, "log_ingest", [&] {
        metric = load_metric_panel(ctx, metrics_csv(ctx));
        const auto raw = io::logs_from_jsonl(io::read_file(logs_jsonl(ctx)), metric.entity_names);
        const auto parsed = logs::parse_templates(raw);
        const auto windows = pipeline::build_windows(parsed, static_cast<int>(metric.n_entities()),
                                                     static_cast<int>(metric.length()), ctx.config);
        write_json(ctx.out / "vocabulary.json", io::vocabulary_to_json(parsed.vocabulary));
        io::write_file(ctx.out / "windows.jsonl", io::windows_to_jsonl(windows));
    });
}

void do_encode(Context& ctx) {
    stage(ctx, "log_encoder", [&] {
        const auto metric = load_metric_panel(ctx, metrics_csv(ctx));
        const auto vocabulary = io::vocabulary_from_json(read_json(ctx.out / "vocabulary.json"));
        const auto windows = io::windows_from_jsonl(io::read_file(ctx.out / "windows.jsonl"));
        const int n = static_cast<int>(metric.n_entities());
        auto enc = encoder::train_log_encoder(windows, static_cast<int>(vocabulary.size()), ctx.config.encoder);
        int truncated = 0;
        std::vector<encoder::WindowKey> keys;
        std::vector<double> labels;
        for (const auto& w : windows) {
            truncated += encoder::tokenize(w, ctx.config.encoder).truncated;
            keys.push_back({w.entity, w.window_index});
            labels.push_back(w.label);
        }
        const auto reduced = encoder::reduce_to_series(encoder::embed_windows(enc, windows), keys, labels, n,
                                                       metric.values.row(n), metric.entity_names, metric.kpi_name);
        if (truncated > 0) std::cerr << "[log_encoder] warning: " << truncated << " token(s) truncated\n";
        if (reduced.degenerate) std::cerr << "[log_encoder] warning: embeddings have no variance\n";
        io::write_binary(ctx.out / "encoder.ckpt", io::matrices_to_bytes(io::encoder_checkpoint(enc, reduced)));
        write_json(ctx.out / "encoder_manifest.json", io::encoder_manifest(enc, reduced, vocabulary, truncated));
        io::write_file(ctx.out / "log_panel.csv", io::panels_to_csv({reduced.panel}, {"log"}));
    });
}

void do_learn(Context& ctx, const std::string& metric_path, const std::string& log_path) {
    ModalityPanel metric, log;
    causal::AttentionWeights att;
    stage(ctx, "fusion", [&] {
        metric = load_metric_panel(ctx, metric_path.empty() ? metrics_csv(ctx) : fs::path(metric_path));
        log = load_log_panel(log_path.empty() ? ctx.out / "log_panel.csv" : fs::path(log_path));
        if (metric.values.rows() != log.values.rows() || metric.length() != log.length()) {
            throw std::invalid_argument("metric and log panels are not aligned");
        }
        fusion::ModalityScore sl, sm;
        att = pipeline::attention_for(metric, log, ctx.config, &sl, &sm);
        Json j;
        j["node_names"] = metric.entity_names;
        j["score_log"] = std::vector<double>(sl.scores.data(), sl.scores.data() + sl.scores.size());
        j["score_metric"] = std::vector<double>(sm.scores.data(), sm.scores.data() + sm.scores.size());
        j["a_log"] = att.a_log;
        j["a_metric"] = att.a_metric;
        write_json(ctx.out / "attention.json", j);
    });
    stage(ctx, "causal_learner", [&] {
        const auto s = causal::fit(metric, log, att, ctx.config.learner);
        if (!s.converged) std::cerr << "[causal_learner] warning: acyclicity tolerance not reached\n";
        write_json(ctx.out / "adjacency.json", io::adjacency_to_json(s));
        io::write_binary(ctx.out / "structure.ckpt", io::matrices_to_bytes(io::structure_checkpoint(s)));
        std::string csv = "epoch,var,orth,node,edge,sparsity,h_metric,h_log,multiplier,total\n";
        for (std::size_t e = 0; e < s.loss_history.size(); ++e) {
            const auto& b = s.loss_history[e];
            char line[320];
            std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e, b.var, b.orth,
                          b.node, b.edge, b.sparsity, b.h_metric, b.h_log, b.multiplier, b.total);
            csv += line;
        }
        io::write_file(ctx.out / "losses.csv", csv);
    });
}

void do_localize(Context& ctx) {
    stage(ctx, "rca", [&] {
        const auto a = io::adjacency_from_json(read_json(ctx.out / "adjacency.json"));
        const auto fused = fusion::fuse(a.a_log, a.a_metric, a.attention, a.node_names);
        write_json(ctx.out / "fused.json", io::fused_to_json(fused));
        io::write_file(ctx.out / "fused.dot", fusion::to_dot(fused));
        const auto ranking = pipeline::localize(fused, ctx.config);
        write_json(ctx.out / "ranking.json", io::ranking_to_json(ranking, ctx.config.incident_id));
    });
}

void do_evaluate(Context& ctx, const std::vector<std::string>& cases) {
    stage(ctx, "metrics", [&] {
        std::vector<std::pair<fs::path, fs::path>> pairs;
        if (cases.empty()) pairs.emplace_back(ctx.out / "ranking.json", truth_json(ctx));
        for (const auto& c : cases) {
            const auto comma = c.find(',');
            if (comma == std::string::npos) throw std::invalid_argument("--case expects RANKING,TRUTH");
            pairs.emplace_back(c.substr(0, comma), c.substr(comma + 1));
        }
        std::vector<metrics::EvaluationCase> eval;
        for (const auto& [rank_path, truth_path] : pairs) {
            const auto r = io::ranking_from_json(read_json(rank_path));
            const auto g = io::ground_truth_from_json(read_json(truth_path));
            eval.push_back({r.entities, {g.root_cause_name}});
        }
        io::MetricsReport rep;
        rep.n_cases = static_cast<int>(eval.size());
        rep.k_values = ctx.config.eval_k;
        for (int k : rep.k_values) {
            rep.precision.push_back(metrics::precision_at_k(eval, k));
            rep.map.push_back(metrics::map_at_k(eval, k));
        }
        rep.mrr = metrics::mrr(eval);
        write_json(ctx.out / "report.json", io::report_to_json(rep));
        std::cout << io::report_to_table(rep);
    });
}

void write_manifest(const Context& ctx, const std::string& command) {
    const fs::path path = ctx.out / "manifest.json";
    const auto hash = io::config_hash(ctx.config);
    Json m;
    if (fs::exists(path)) {
        try {
            auto old = read_json(path);
            if (old.value("config_hash", "") == hash) m = std::move(old);
        } catch (const std::exception&) {
        }
    }
    m["config_hash"] = hash;
    m["seed"] = ctx.config.seed;
    m["last_command"] = command;
    if (!m.contains("stage_seconds")) m["stage_seconds"] = Json::object();
    for (const auto& [name, secs] : ctx.timings) m["stage_seconds"][name] = secs;
    m["config"] = io::config_to_json(ctx.config);
    write_json(path, m);
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

void require_dir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p)) throw ValidationError(std::string(what) + " '" + p.string() + "' does not exist");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-modal causal structure learning and root cause ranking"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_flag, data_flag;
    std::optional<std::uint64_t> seed_flag;
    bool print_config = false;
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed_flag, "Seed for every stochastic stage");
    app.add_option("--out", out_flag, "Output directory (simulate: data directory)");
    app.add_option("--data", data_flag, "Data directory");
    app.add_flag("--print-config", print_config, "Print the effective configuration before running");

    auto* sim = app.add_subcommand("simulate", "Generate a synthetic incident (metrics, logs, ground truth)");
    auto* parse = app.add_subcommand("parse", "Parse logs into templates and labelled windows");
    auto* encode = app.add_subcommand("encode", "Train the log encoder and emit the log panel");
    auto* learn = app.add_subcommand("learn", "Modality attention and causal structure learning");
    std::string metric_panel_path, log_panel_path;
    learn->add_option("--metric-panel", metric_panel_path, "Metric panel CSV (default: data/metrics.csv)");
    learn->add_option("--log-panel", log_panel_path, "Log panel CSV (default: out/log_panel.csv)");
    auto* localize = app.add_subcommand("localize", "Fuse graphs and rank root causes");
    auto* evaluate = app.add_subcommand("evaluate", "PR@K, MAP@K and MRR of rankings");
    std::vector<std::string> cases;
    evaluate->add_option("--case", cases, "RANKING_JSON,GROUND_TRUTH_JSON (repeatable)");
    auto* run = app.add_subcommand("run-pipeline", "parse, encode, learn, localize and evaluate in one go");
    bool run_simulate = false;
    run->add_flag("--simulate", run_simulate, "Generate the incident first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    Context ctx;
    try {
        if (!config_path.empty()) {
            ctx.config = io::config_from_json(io::parse_json(io::read_file(config_path), config_path));
        }
        if (auto v = env("MMRCA_DATA_DIR")) ctx.config.data_dir = *v;
        if (auto v = env("MMRCA_OUT_DIR")) ctx.config.out_dir = *v;
        if (auto v = env("MMRCA_SEED")) {
            try {
                std::size_t used = 0;
                ctx.config.seed = std::stoull(*v, &used);
                if (used != v->size()) throw std::invalid_argument(*v);
            } catch (const std::exception&) {
                throw ValidationError("MMRCA_SEED must be a non-negative integer");
            }
        }
        if (!data_flag.empty()) ctx.config.data_dir = data_flag;
        if (seed_flag) ctx.config.seed = *seed_flag;
        if (!out_flag.empty()) (sim->parsed() ? ctx.config.data_dir : ctx.config.out_dir) = out_flag;
        ctx.config = pipeline::seeded(ctx.config);
        pipeline::validate(ctx.config);
        ctx.data = ctx.config.data_dir;
        ctx.out = ctx.config.out_dir;
        if (print_config) std::cout << io::config_to_json(ctx.config).dump(2) << "\n";
        const bool reads_data = parse->parsed() || encode->parsed() || learn->parsed() ||
                                (run->parsed() && !run_simulate) || (evaluate->parsed() && cases.empty());
        if (reads_data) require_dir(ctx.data, "data directory");
        if (!sim->parsed()) fs::create_directories(ctx.out);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid configuration: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        if (sim->parsed()) {
            do_simulate(ctx);
            return 0;
        }
        if (run->parsed() && run_simulate) do_simulate(ctx);
        if (parse->parsed() || run->parsed()) do_parse(ctx);
        if (encode->parsed() || run->parsed()) do_encode(ctx);
        if (learn->parsed() || run->parsed()) do_learn(ctx, metric_panel_path, log_panel_path);
        if (localize->parsed() || run->parsed()) do_localize(ctx);
        if (evaluate->parsed() || (run->parsed() && fs::exists(truth_json(ctx)))) do_evaluate(ctx, cases);
        write_manifest(ctx, command);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
