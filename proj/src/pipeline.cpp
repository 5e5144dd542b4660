#include "mmrca/pipeline.hpp"

#include <algorithm>

namespace mmrca::pipeline {

void validate(const PipelineConfig& c) {
    if (c.window_size < 1) throw std::invalid_argument("window_size must be at least 1");
    if (c.incident_id.empty()) throw std::invalid_argument("incident_id must not be empty");
    encoder::validate(c.encoder);
    causal::validate(c.learner);
    if (c.fusion.tau < -1) throw std::invalid_argument("fusion.tau must be -1 or non-negative");
    if (c.fusion.k < 1) throw std::invalid_argument("fusion.k must be at least 1");
    if (!(c.rca.beta >= 0.0 && c.rca.beta <= 1.0)) throw std::invalid_argument("rca.beta must lie in [0, 1]");
    if (!(c.rca.restart > 0.0 && c.rca.restart <= 1.0)) throw std::invalid_argument("rca.restart must lie in (0, 1]");
    if (!(c.rca.tol > 0.0) || c.rca.max_iter < 1) throw std::invalid_argument("rca.tol and rca.max_iter must be positive");
    if (!(c.edge_prune >= 0.0 && c.edge_prune < 1.0)) throw std::invalid_argument("edge_prune must lie in [0, 1)");
    if (c.eval_k.empty()) throw std::invalid_argument("eval_k must not be empty");
    for (int k : c.eval_k) {
        if (k < 1) throw std::invalid_argument("eval_k values must be at least 1");
    }
    const auto& s = c.simulation;
    if (s.n_entities < 1) throw std::invalid_argument("simulation.n_entities must be positive");
    if (!(s.noise_std >= 0.0)) throw std::invalid_argument("simulation.noise_std must be non-negative");
    if (!(s.edge_prob >= 0.0 && s.edge_prob <= 1.0)) throw std::invalid_argument("simulation.edge_prob must lie in [0, 1]");
    if (s.metric_kinds.empty()) throw std::invalid_argument("simulation.metric_kinds must not be empty");
}

PipelineConfig seeded(PipelineConfig c) {
    c.encoder.seed = c.seed;
    c.learner.seed = c.seed;
    return c;
}

simgen::ScenarioSpec scenario_from_config(const PipelineConfig& config) {
    const auto& s = config.simulation;
    simgen::ScenarioSpec spec;
    if (s.dag.empty()) {
        spec = simgen::random_scenario(s.n_entities, s.fault_type, s.horizon, s.noise_std, config.seed, s.edge_prob);
    } else {
        const int n = static_cast<int>(s.dag.size());
        spec.n_entities = n;
        spec.ground_truth_dag = Eigen::MatrixXi::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            if (static_cast<int>(s.dag[i].size()) != n) throw std::invalid_argument("simulation.dag must be square");
            for (int j = 0; j < n; ++j) spec.ground_truth_dag(i, j) = s.dag[i][j];
        }
        spec.root_cause = s.root_cause < 0 ? 0 : s.root_cause;
        spec.fault_type = s.fault_type;
        spec.horizon = s.horizon;
        spec.noise_std = s.noise_std;
        spec.seed = config.seed;
    }
    if (!s.kpi_parents.empty()) spec.kpi_parents = s.kpi_parents;
    spec.lag_order = config.learner.p;
    spec.metric_kinds = s.metric_kinds;
    simgen::validate(spec);
    return spec;
}

ModalityPanel aggregate_panel(const ModalityPanel& panel, int window_size) {
    if (window_size < 1) throw std::invalid_argument("window_size must be at least 1");
    if (window_size == 1) return panel;
    const auto windows = panel.length() / window_size;
    if (windows < 1) throw std::invalid_argument("panel shorter than one window");
    ModalityPanel out = panel;
    out.values.resize(panel.n_nodes(), windows);
    for (Eigen::Index w = 0; w < windows; ++w) {
        out.values.col(w) = panel.values.middleCols(w * window_size, window_size).rowwise().mean();
    }
    return out;
}

ModalityPanel select_metric_panel(const std::vector<ModalityPanel>& panels, const std::vector<std::string>& names,
                                  const std::string& metric_name) {
    if (panels.empty()) throw std::invalid_argument("no metric panels");
    if (metric_name.empty()) return panels.front();
    for (std::size_t i = 0; i < names.size() && i < panels.size(); ++i) {
        if (names[i] == metric_name) return panels[i];
    }
    throw std::invalid_argument("metric '" + metric_name + "' not found");
}

std::vector<logs::LogSequenceWindow> build_windows(const logs::ParsedLogs& parsed, int n_entities, int n_windows,
                                                   const PipelineConfig& config) {
    auto windows = logs::window_sequences(parsed.events, parsed.vocabulary, config.window_size, n_entities, n_windows);
    const auto& signals = config.golden_signals.empty() ? logs::default_golden_signals() : config.golden_signals;
    logs::label_all(windows, parsed.vocabulary, signals);
    return windows;
}

LogStage run_log_stage(const logs::ParsedLogs& parsed, int n_entities, const Eigen::RowVectorXd& kpi,
                       const std::vector<std::string>& entity_names, const std::string& kpi_name,
                       const PipelineConfig& config) {
    const int n_windows = static_cast<int>(kpi.size());
    auto windows = build_windows(parsed, n_entities, n_windows, config);
    auto enc = encoder::train_log_encoder(windows, static_cast<int>(parsed.vocabulary.size()), config.encoder);
    int truncated = 0;
    std::vector<encoder::WindowKey> keys;
    std::vector<double> labels;
    keys.reserve(windows.size());
    labels.reserve(windows.size());
    for (const auto& w : windows) {
        truncated += encoder::tokenize(w, config.encoder).truncated;
        keys.push_back({w.entity, w.window_index});
        labels.push_back(w.label);
    }
    const auto emb = encoder::embed_windows(enc, windows);
    auto reduced = encoder::reduce_to_series(emb, keys, labels, n_entities, kpi, entity_names, kpi_name);
    return LogStage{parsed, std::move(windows), std::move(enc), std::move(reduced), truncated};
}

causal::AttentionWeights attention_for(const ModalityPanel& metric_panel, const ModalityPanel& log_panel,
                                       const PipelineConfig& config, fusion::ModalityScore* score_log,
                                       fusion::ModalityScore* score_metric) {
    const int tau = config.fusion.tau < 0 ? config.learner.p : config.fusion.tau;
    const int k = std::min<int>(config.fusion.k, static_cast<int>(metric_panel.n_entities()));
    auto sl = fusion::cross_correlation_scores(log_panel, tau, fusion::Modality::log, config.fusion.mode);
    auto sm = fusion::cross_correlation_scores(metric_panel, tau, fusion::Modality::metric, config.fusion.mode);
    auto att = fusion::modality_attention(sl, sm, k);
    if (score_log) *score_log = std::move(sl);
    if (score_metric) *score_metric = std::move(sm);
    return att;
}

rca::RankedRootCauses localize(const fusion::FusedCausalGraph& graph, const PipelineConfig& config) {
    Eigen::MatrixXd adj = (graph.adjacency.array() > config.edge_prune).select(graph.adjacency, 0.0);
    return rca::localize(adj, graph.node_names, config.rca);
}

Analysis analyze(const ModalityPanel& metric_panel, const ModalityPanel& log_panel, const PipelineConfig& config) {
    Analysis a;
    a.attention = attention_for(metric_panel, log_panel, config, &a.score_log, &a.score_metric);
    a.structure = causal::fit(metric_panel, log_panel, a.attention, config.learner);
    a.fused = fusion::fuse(a.structure, a.attention, metric_panel.node_names());
    a.ranking = localize(a.fused, config);
    return a;
}

IncidentRun run_incident(const simgen::IncidentDataset& data, const PipelineConfig& config) {
    ModalityPanel metric =
        aggregate_panel(select_metric_panel(data.metric_panels, data.metric_names, config.metric_name), config.window_size);
    auto parsed = logs::parse_templates(data.raw_logs);
    auto log_stage = run_log_stage(parsed, static_cast<int>(metric.n_entities()), metric.values.row(metric.n_nodes() - 1),
                                   metric.entity_names, metric.kpi_name, config);
    auto analysis = analyze(metric, log_stage.reduced.panel, config);
    return IncidentRun{std::move(metric), std::move(log_stage), std::move(analysis)};
}

int rank_of(const rca::RankedRootCauses& ranking, int entity) {
    for (std::size_t r = 0; r < ranking.ranking.size(); ++r) {
        if (ranking.ranking[r].index == entity) return static_cast<int>(r) + 1;
    }
    return 0;
}

}  // namespace mmrca::pipeline
