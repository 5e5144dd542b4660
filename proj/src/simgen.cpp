#include "mmrca/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace mmrca::simgen {

namespace {

constexpr double kEdgeWeightLo = 0.3;
constexpr double kEdgeWeightHi = 0.8;
constexpr double kOnsetFraction = 0.6;
constexpr double kNormalLogRate = 2.0;
constexpr int kBurstMin = 10;
constexpr int kBurstMax = 30;
constexpr int kBurstSpan = 5;
constexpr double kPropagatedLogRate = 1.5;
constexpr double kLoadSurgeRate = 4.0;
// Per-step fault intensity is drawn from [lo, hi] times the shock magnitude.
constexpr double kIntensityLo = 0.5;
constexpr double kIntensityHi = 1.5;

bool reaches(const Eigen::MatrixXi& dag, int from, const std::vector<bool>& targets) {
    const auto n = static_cast<int>(dag.rows());
    std::vector<bool> seen(n, false);
    std::vector<int> stack{from};
    seen[from] = true;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        if (targets[u]) return true;
        for (int v = 0; v < n; ++v) {
            if (dag(u, v) != 0 && !seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    return false;
}

}  // namespace

std::string_view to_string(FaultType f) {
    switch (f) {
        case FaultType::none: return "none";
        case FaultType::metric_only: return "metric_only";
        case FaultType::log_only: return "log_only";
        case FaultType::both: return "both";
    }
    return "none";
}

FaultType fault_type_from_string(std::string_view s) {
    if (s == "none") return FaultType::none;
    if (s == "metric_only") return FaultType::metric_only;
    if (s == "log_only") return FaultType::log_only;
    if (s == "both") return FaultType::both;
    throw std::invalid_argument("unknown fault type '" + std::string(s) + "'");
}

std::vector<int> topological_order(const Eigen::MatrixXi& dag) {
    const auto n = static_cast<int>(dag.rows());
    std::vector<int> indeg(n, 0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) indeg[j] += dag(i, j) != 0 ? 1 : 0;
    }
    std::queue<int> ready;
    for (int i = 0; i < n; ++i) {
        if (indeg[i] == 0) ready.push(i);
    }
    std::vector<int> order;
    while (!ready.empty()) {
        const int u = ready.front();
        ready.pop();
        order.push_back(u);
        for (int v = 0; v < n; ++v) {
            if (dag(u, v) != 0 && --indeg[v] == 0) ready.push(v);
        }
    }
    if (static_cast<int>(order.size()) != n) return {};
    return order;
}

bool is_acyclic(const Eigen::MatrixXi& dag) {
    return dag.rows() == dag.cols() && (dag.rows() == 0 || !topological_order(dag).empty());
}

std::vector<int> resolved_kpi_parents(const ScenarioSpec& spec) {
    if (!spec.kpi_parents.empty()) return spec.kpi_parents;
    std::vector<int> sinks;
    for (int i = 0; i < spec.n_entities; ++i) {
        if (spec.ground_truth_dag.row(i).sum() == 0) sinks.push_back(i);
    }
    return sinks;
}

void validate(const ScenarioSpec& spec) {
    if (spec.n_entities < 1) throw std::invalid_argument("n_entities must be positive");
    if (spec.ground_truth_dag.rows() != spec.n_entities || spec.ground_truth_dag.cols() != spec.n_entities) {
        throw std::invalid_argument("ground_truth_dag must be n_entities x n_entities");
    }
    for (int i = 0; i < spec.n_entities; ++i) {
        for (int j = 0; j < spec.n_entities; ++j) {
            const int v = spec.ground_truth_dag(i, j);
            if (v != 0 && v != 1) throw std::invalid_argument("ground_truth_dag must be binary");
        }
    }
    if (!is_acyclic(spec.ground_truth_dag)) throw std::invalid_argument("ground_truth_dag must be acyclic");
    if (spec.lag_order < 1) throw std::invalid_argument("lag_order must be at least 1");
    if (spec.horizon < 4 * spec.lag_order) {
        throw std::invalid_argument("horizon " + std::to_string(spec.horizon) + " is below 4x the lag order " +
                                    std::to_string(spec.lag_order));
    }
    if (!(spec.noise_std >= 0.0) || !std::isfinite(spec.noise_std)) {
        throw std::invalid_argument("noise_std must be a non-negative finite number");
    }
    if (spec.root_cause < 0 || spec.root_cause >= spec.n_entities) {
        throw std::invalid_argument("root_cause " + std::to_string(spec.root_cause) + " is not an entity index");
    }
    if (spec.metric_kinds.empty()) throw std::invalid_argument("at least one metric kind is required");
    const auto parents = resolved_kpi_parents(spec);
    std::vector<bool> is_parent(spec.n_entities, false);
    for (int p : parents) {
        if (p < 0 || p >= spec.n_entities) throw std::invalid_argument("kpi parent index out of range");
        is_parent[p] = true;
    }
    if (!reaches(spec.ground_truth_dag, spec.root_cause, is_parent)) {
        throw std::invalid_argument("root_cause has no directed path to the KPI-affecting entities");
    }
}

std::vector<std::string> default_entity_names(int n) {
    static const char* base[] = {"frontend", "cart",     "checkout", "payment",  "catalog", "shipping",
                                 "currency", "email",    "ads",      "recommend", "auth",    "search"};
    std::vector<std::string> names;
    names.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (i < static_cast<int>(std::size(base))) {
            names.emplace_back(base[i]);
        } else {
            names.push_back("service_" + std::to_string(i));
        }
    }
    return names;
}

const std::vector<std::string>& normal_templates() {
    static const std::vector<std::string> t = {
        "GET /api/v1/items/{int} returned 200 in {int} ms",
        "user {uuid} session refreshed from {ip}",
        "cache lookup key {hex} hit ratio {float}",
        "request handled by worker {int} queue depth {int}",
        "heartbeat ok seq {int} from {ip}:{port}",
    };
    return t;
}

const std::vector<std::string>& fault_templates(FaultType f) {
    static const std::vector<std::string> none;
    static const std::vector<std::string> query = {
        "ERROR database query failed with code {int} after {int} ms",
        "WARN connection timeout to db at {ip}:{port}",
        "login failed for user {uuid}: Permission denied",
    };
    static const std::vector<std::string> disk = {
        "ERROR write failed: No space left on device, {int} bytes pending",
        "critical: disk usage at {int} percent on volume {hex}",
        "exception while flushing segment {hex} to disk",
    };
    switch (f) {
        case FaultType::log_only: return query;
        case FaultType::both: return disk;
        default: return none;
    }
}

std::string render(std::string_view tmpl, std::mt19937_64& rng) {
    std::string out;
    out.reserve(tmpl.size() + 32);
    std::size_t pos = 0;
    char buf[64];
    while (pos < tmpl.size()) {
        const auto open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out.append(tmpl.substr(pos));
            break;
        }
        const auto close = tmpl.find('}', open);
        if (close == std::string_view::npos) throw std::invalid_argument("unterminated placeholder in template");
        out.append(tmpl.substr(pos, open - pos));
        const auto key = tmpl.substr(open + 1, close - open - 1);
        if (key == "int") {
            std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(rng() % 5000));
        } else if (key == "float") {
            std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(rng() % 1000) / 1000.0);
        } else if (key == "ip") {
            std::snprintf(buf, sizeof buf, "10.%u.%u.%u", static_cast<unsigned>(rng() % 256),
                          static_cast<unsigned>(rng() % 256), static_cast<unsigned>(rng() % 256));
        } else if (key == "port") {
            std::snprintf(buf, sizeof buf, "%u", static_cast<unsigned>(1024 + rng() % 60000));
        } else if (key == "hex") {
            std::snprintf(buf, sizeof buf, "0x%08llx", static_cast<unsigned long long>(rng() & 0xffffffffULL));
        } else if (key == "uuid") {
            const auto a = rng();
            const auto b = rng();
            std::snprintf(buf, sizeof buf, "%08llx-%04llx-%04llx-%04llx-%012llx",
                          static_cast<unsigned long long>(a >> 32), static_cast<unsigned long long>((a >> 16) & 0xffff),
                          static_cast<unsigned long long>(a & 0xffff), static_cast<unsigned long long>(b >> 48),
                          static_cast<unsigned long long>(b & 0xffffffffffffULL));
        } else {
            throw std::invalid_argument("unknown placeholder {" + std::string(key) + "}");
        }
        out.append(buf);
        pos = close + 1;
    }
    return out;
}

IncidentDataset generate_incident(const ScenarioSpec& spec) {
    validate(spec);
    const int ne = spec.n_entities;
    const int n = ne + 1;
    const int kpi = ne;
    const int horizon = spec.horizon;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> weight_dist(kEdgeWeightLo, kEdgeWeightHi);

    IncidentDataset ds;
    ds.ground_truth = spec;
    ds.entity_names = default_entity_names(ne);

    // Edge weights in row-major order: entity block first, then KPI parents.
    ds.edge_weights = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < ne; ++i) {
        for (int j = 0; j < ne; ++j) {
            if (spec.ground_truth_dag(i, j) != 0) ds.edge_weights(i, j) = weight_dist(rng);
        }
    }
    for (int p : resolved_kpi_parents(spec)) ds.edge_weights(p, kpi) = weight_dist(rng);

    ds.fault_onset = static_cast<int>(std::floor(kOnsetFraction * horizon));
    ds.shock_magnitude = std::max(1.0, 8.0 * spec.noise_std);
    const bool metric_fault = spec.fault_type == FaultType::metric_only || spec.fault_type == FaultType::both;
    const bool log_fault = spec.fault_type == FaultType::log_only || spec.fault_type == FaultType::both;
    const bool any_fault = spec.fault_type != FaultType::none;

    // The fault is a sustained exogenous input at the root whose intensity
    // fluctuates from step to step around 1.
    std::vector<double> intensity(horizon, 0.0);
    if (any_fault) {
        std::uniform_real_distribution<double> level(kIntensityLo, kIntensityHi);
        for (int t = ds.fault_onset; t < horizon; ++t) intensity[t] = level(rng);
    }
    // Latent fault impact: the intensity pushed through the same weights.
    // Drives log emission and, for log-only faults, the KPI.
    const Eigen::MatrixXd wt = ds.edge_weights.transpose();
    Eigen::MatrixXd impact = Eigen::MatrixXd::Zero(n, horizon);
    for (int t = std::max(1, ds.fault_onset); t < horizon && any_fault; ++t) {
        Eigen::VectorXd g = wt * impact.col(t - 1);
        g(spec.root_cause) += intensity[t];
        impact.col(t) = g;
    }

    std::normal_distribution<double> noise(0.0, 1.0);
    const auto& kinds = spec.metric_kinds;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, horizon);
        for (int i = 0; i < n; ++i) x(i, 0) = spec.noise_std * noise(rng);
        for (int t = 1; t < horizon; ++t) {
            Eigen::VectorXd next = wt * x.col(t - 1);
            for (int i = 0; i < n; ++i) next(i) += spec.noise_std * noise(rng);
            // The shock lands on the primary metric kind only.
            if (k == 0 && metric_fault) next(spec.root_cause) += ds.shock_magnitude * intensity[t];
            if (!metric_fault && log_fault) next(kpi) += ds.shock_magnitude * impact(kpi, t);
            x.col(t) = next;
        }
        // Every panel carries the same KPI series.
        if (k > 0) x.row(kpi) = ds.metric_panels[0].values.row(kpi);
        ModalityPanel panel;
        panel.values = std::move(x);
        panel.entity_names = ds.entity_names;
        panel.kpi_name = ds.kpi_name;
        ds.metric_panels.push_back(std::move(panel));
        ds.metric_names.push_back(kinds[k]);
    }

    // Logs.
    const auto& normal = normal_templates();
    const auto& signature = fault_templates(spec.fault_type);
    std::poisson_distribution<int> normal_count(kNormalLogRate);
    std::uniform_int_distribution<std::size_t> pick_normal(0, normal.size() - 1);

    std::vector<int> burst_per_step(horizon, 0);
    if (log_fault) {
        std::uniform_int_distribution<int> burst(kBurstMin, kBurstMax);
        const int total = burst(rng);
        for (int b = 0; b < total; ++b) {
            const int t = ds.fault_onset + static_cast<int>(rng() % kBurstSpan);
            if (t < horizon) ++burst_per_step[t];
        }
    }

    for (int t = 0; t < horizon; ++t) {
        for (int e = 0; e < ne; ++e) {
            int count = normal_count(rng);
            if (spec.fault_type == FaultType::metric_only && e == spec.root_cause && t >= ds.fault_onset) {
                count += std::poisson_distribution<int>(kLoadSurgeRate)(rng);
            }
            for (int c = 0; c < count; ++c) {
                ds.raw_logs.push_back({t, e, render(normal[pick_normal(rng)], rng)});
            }
            if (!log_fault || t < ds.fault_onset) continue;
            int faults = std::poisson_distribution<int>(kPropagatedLogRate * std::max(0.0, impact(e, t)))(rng);
            if (e == spec.root_cause) faults += burst_per_step[t];
            std::uniform_int_distribution<std::size_t> pick_fault(0, signature.size() - 1);
            for (int c = 0; c < faults; ++c) {
                ds.raw_logs.push_back({t, e, render(signature[pick_fault(rng)], rng)});
            }
        }
    }
    return ds;
}

ScenarioSpec random_scenario(int n_entities, FaultType fault, int horizon, double noise_std, std::uint64_t seed,
                             double edge_prob) {
    if (n_entities < 1) throw std::invalid_argument("n_entities must be positive");
    // Structure is drawn from a stream decorrelated from the generator's own seed use.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<int> order(n_entities);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::bernoulli_distribution edge(edge_prob);

    ScenarioSpec spec;
    spec.n_entities = n_entities;
    spec.ground_truth_dag = Eigen::MatrixXi::Zero(n_entities, n_entities);
    for (int a = 0; a < n_entities; ++a) {
        for (int b = a + 1; b < n_entities; ++b) {
            if (edge(rng)) spec.ground_truth_dag(order[a], order[b]) = 1;
        }
    }
    spec.root_cause = static_cast<int>(rng() % static_cast<std::uint64_t>(n_entities));
    spec.fault_type = fault;
    spec.horizon = horizon;
    spec.noise_std = noise_std;
    spec.seed = seed;
    return spec;
}

ScenarioSpec chain_scenario(int n_entities, FaultType fault, int horizon, double noise_std, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.n_entities = n_entities;
    spec.ground_truth_dag = Eigen::MatrixXi::Zero(n_entities, n_entities);
    for (int i = 0; i + 1 < n_entities; ++i) spec.ground_truth_dag(i, i + 1) = 1;
    spec.root_cause = 0;
    spec.fault_type = fault;
    spec.horizon = horizon;
    spec.noise_std = noise_std;
    spec.seed = seed;
    return spec;
}

}  // namespace mmrca::simgen
