#include "mmrca/io.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mmrca::io {

namespace {

constexpr char kMagic[8] = {'M', 'M', 'R', 'C', 'A', 'B', 'I', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) throw std::invalid_argument("unknown config key '" + where + "." + key + "'");
    }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void put(std::string& bytes, const T& v) {
    bytes.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(const std::string& bytes, std::size_t& pos) {
    if (pos + sizeof(T) > bytes.size()) throw std::runtime_error("checkpoint truncated");
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
}

Json breakdown_to_json(const causal::LossBreakdown& b) {
    Json j;
    j["var"] = b.var;
    j["orth"] = b.orth;
    j["node"] = b.node;
    j["edge"] = b.edge;
    j["sparsity"] = b.sparsity;
    j["h_metric"] = b.h_metric;
    j["h_log"] = b.h_log;
    j["multiplier"] = b.multiplier;
    j["total"] = b.total;
    return j;
}

causal::LossBreakdown breakdown_from_json(const Json& j) {
    causal::LossBreakdown b;
    b.var = j.at("var").get<double>();
    b.orth = j.at("orth").get<double>();
    b.node = j.at("node").get<double>();
    b.edge = j.at("edge").get<double>();
    b.sparsity = j.at("sparsity").get<double>();
    b.h_metric = j.at("h_metric").get<double>();
    b.h_log = j.at("h_log").get<double>();
    b.multiplier = j.at("multiplier").get<double>();
    b.total = j.at("total").get<double>();
    return b;
}

Json encoder_config_to_json(const encoder::EncoderConfig& c) {
    Json j;
    j["d_model"] = c.d_model;
    j["n_layers"] = c.n_layers;
    j["n_heads"] = c.n_heads;
    j["max_len"] = c.max_len;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["freq_buckets"] = c.freq_buckets;
    j["seed"] = c.seed;
    return j;
}

encoder::EncoderConfig encoder_config_from_json(const Json& j, encoder::EncoderConfig c = {}) {
    require_keys(j, {"d_model", "n_layers", "n_heads", "max_len", "lr", "epochs", "batch_size", "freq_buckets", "seed"},
                 "encoder");
    read_opt(j, "d_model", c.d_model);
    read_opt(j, "n_layers", c.n_layers);
    read_opt(j, "n_heads", c.n_heads);
    read_opt(j, "max_len", c.max_len);
    read_opt(j, "lr", c.lr);
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "batch_size", c.batch_size);
    read_opt(j, "freq_buckets", c.freq_buckets);
    read_opt(j, "seed", c.seed);
    return c;
}

Json learner_config_to_json(const causal::LearnerConfig& c) {
    Json j;
    j["p"] = c.p;
    j["d1"] = c.d1;
    j["d2"] = c.d2;
    j["lambda_var"] = c.lambda_var;
    j["lambda_orth"] = c.lambda_orth;
    j["lambda_node"] = c.lambda_node;
    j["lambda_edge"] = c.lambda_edge;
    j["lambda_sparse"] = c.lambda_sparse;
    j["lr"] = c.lr;
    j["epochs"] = c.epochs;
    j["seed"] = c.seed;
    j["acyclicity_start"] = c.acyclicity_start;
    j["acyclicity_growth"] = c.acyclicity_growth;
    j["acyclicity_interval"] = c.acyclicity_interval;
    j["temperature"] = c.temperature;
    j["node_loss_form"] = c.node_loss_form == causal::NodeLossForm::info_nce ? "info_nce" : "cosine_ratio";
    j["adjacency_init"] = c.adjacency_init;
    j["weight_decay"] = c.weight_decay;
    j["acyclicity_tolerance"] = c.acyclicity_tolerance;
    j["standardize"] = c.standardize;
    return j;
}

causal::LearnerConfig learner_config_from_json(const Json& j) {
    require_keys(j, {"p", "d1", "d2", "lambda_var", "lambda_orth", "lambda_node", "lambda_edge", "lambda_sparse", "lr",
                     "epochs", "seed", "acyclicity_start", "acyclicity_growth", "acyclicity_interval", "temperature",
                     "node_loss_form", "adjacency_init", "weight_decay", "acyclicity_tolerance", "standardize"},
                 "learner");
    causal::LearnerConfig c;
    read_opt(j, "p", c.p);
    read_opt(j, "d1", c.d1);
    read_opt(j, "d2", c.d2);
    read_opt(j, "lambda_var", c.lambda_var);
    read_opt(j, "lambda_orth", c.lambda_orth);
    read_opt(j, "lambda_node", c.lambda_node);
    read_opt(j, "lambda_edge", c.lambda_edge);
    read_opt(j, "lambda_sparse", c.lambda_sparse);
    read_opt(j, "lr", c.lr);
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "seed", c.seed);
    read_opt(j, "acyclicity_start", c.acyclicity_start);
    read_opt(j, "acyclicity_growth", c.acyclicity_growth);
    read_opt(j, "acyclicity_interval", c.acyclicity_interval);
    read_opt(j, "temperature", c.temperature);
    if (j.contains("node_loss_form")) {
        const auto f = j.at("node_loss_form").get<std::string>();
        if (f == "info_nce") {
            c.node_loss_form = causal::NodeLossForm::info_nce;
        } else if (f == "cosine_ratio") {
            c.node_loss_form = causal::NodeLossForm::cosine_ratio;
        } else {
            throw std::invalid_argument("learner.node_loss_form must be info_nce or cosine_ratio");
        }
    }
    read_opt(j, "adjacency_init", c.adjacency_init);
    read_opt(j, "weight_decay", c.weight_decay);
    read_opt(j, "acyclicity_tolerance", c.acyclicity_tolerance);
    read_opt(j, "standardize", c.standardize);
    return c;
}

}  // namespace

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path partial = path;
    partial += ".partial";
    {
        std::ofstream out(partial, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + partial.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for " + partial.string());
    }
    fs::rename(partial, path);
}

void write_binary(const fs::path& path, const std::string& bytes) { write_file(path, bytes); }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument("malformed JSON in " + what + ": " + e.what());
    }
}

std::string panels_to_csv(const std::vector<ModalityPanel>& panels, const std::vector<std::string>& metric_names) {
    if (panels.empty() || panels.size() != metric_names.size()) {
        throw std::invalid_argument("panels_to_csv: need one name per panel");
    }
    std::string out = "timestamp,entity,metric_name,value\n";
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const auto& p = panels[k];
        validate_panel(p);
        for (Eigen::Index e = 0; e < p.n_entities(); ++e) {
            for (Eigen::Index t = 0; t < p.length(); ++t) {
                out += std::to_string(t) + "," + p.entity_names[static_cast<std::size_t>(e)] + "," + metric_names[k] + "," +
                       format_double(p.values(e, t)) + "\n";
            }
        }
    }
    const auto& p0 = panels.front();
    for (Eigen::Index t = 0; t < p0.length(); ++t) {
        out += std::to_string(t) + "," + p0.kpi_name + ",kpi," + format_double(p0.values(p0.n_entities(), t)) + "\n";
    }
    return out;
}

PanelSet panels_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || split(line, ',') != std::vector<std::string>{"timestamp", "entity", "metric_name", "value"}) {
        throw std::invalid_argument("metrics CSV must start with the header timestamp,entity,metric_name,value");
    }
    std::vector<std::string> metrics, entities;
    std::string kpi_name;
    struct Cell {
        std::string metric, entity;
        long t;
        double v;
    };
    std::vector<Cell> cells;
    long max_t = -1;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto f = split(line, ',');
        if (f.size() != 4) throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) + ": expected 4 fields");
        Cell c;
        try {
            std::size_t used = 0;
            c.t = std::stol(f[0], &used);
            if (used != f[0].size()) throw std::invalid_argument("t");
            c.v = std::stod(f[3], &used);
            if (used != f[3].size()) throw std::invalid_argument("v");
        } catch (const std::exception&) {
            throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) + ": bad number");
        }
        if (c.t < 0) throw std::invalid_argument("metrics CSV line " + std::to_string(line_no) + ": negative timestamp");
        c.entity = f[1];
        c.metric = f[2];
        if (c.metric == "kpi") {
            if (kpi_name.empty()) kpi_name = c.entity;
            if (c.entity != kpi_name) throw std::invalid_argument("metrics CSV: more than one KPI series");
        } else {
            if (std::find(metrics.begin(), metrics.end(), c.metric) == metrics.end()) metrics.push_back(c.metric);
            if (std::find(entities.begin(), entities.end(), c.entity) == entities.end()) entities.push_back(c.entity);
        }
        max_t = std::max(max_t, c.t);
        cells.push_back(std::move(c));
    }
    if (metrics.empty() || kpi_name.empty()) throw std::invalid_argument("metrics CSV needs entity rows and a KPI series");
    const auto ne = static_cast<Eigen::Index>(entities.size());
    const auto t = static_cast<Eigen::Index>(max_t + 1);
    PanelSet out;
    out.metric_names = metrics;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < metrics.size(); ++k) {
        ModalityPanel p;
        p.values = Eigen::MatrixXd::Constant(ne + 1, t, nan);
        p.entity_names = entities;
        p.kpi_name = kpi_name;
        out.panels.push_back(std::move(p));
    }
    std::map<std::string, std::size_t> metric_idx, entity_idx;
    for (std::size_t i = 0; i < metrics.size(); ++i) metric_idx[metrics[i]] = i;
    for (std::size_t i = 0; i < entities.size(); ++i) entity_idx[entities[i]] = i;
    for (const auto& c : cells) {
        auto fill = [&](ModalityPanel& p, Eigen::Index row) {
            if (!std::isnan(p.values(row, c.t))) {
                throw std::invalid_argument("metrics CSV: duplicate cell for " + c.entity + "/" + c.metric + " at t=" +
                                            std::to_string(c.t));
            }
            p.values(row, c.t) = c.v;
        };
        if (c.metric == "kpi") {
            for (auto& p : out.panels) p.values(ne, c.t) = c.v;
        } else {
            fill(out.panels[metric_idx[c.metric]], static_cast<Eigen::Index>(entity_idx[c.entity]));
        }
    }
    for (std::size_t k = 0; k < out.panels.size(); ++k) {
        if (out.panels[k].values.hasNaN()) {
            throw std::invalid_argument("metrics CSV: missing cells for metric '" + metrics[k] + "'");
        }
    }
    return out;
}

std::string logs_to_jsonl(const std::vector<simgen::LogRecord>& logs) {
    std::string out;
    for (const auto& r : logs) {
        Json j;
        j["ts"] = r.timestamp;
        j["entity"] = r.entity;
        j["msg"] = r.message;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<logs::RawRecord> logs_from_jsonl(const std::string& text, const std::vector<std::string>& entity_names) {
    std::vector<logs::RawRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        Json j = parse_json(line, "logs line " + std::to_string(line_no));
        logs::RawRecord r;
        if (j.contains("ts") && j["ts"].is_number_integer()) r.timestamp = j["ts"].get<std::int64_t>();
        if (j.contains("entity")) {
            const auto& e = j["entity"];
            if (e.is_number_integer()) {
                r.entity = e.get<int>();
            } else if (e.is_string()) {
                auto it = std::find(entity_names.begin(), entity_names.end(), e.get<std::string>());
                if (it == entity_names.end()) {
                    throw std::invalid_argument("logs line " + std::to_string(line_no) + ": unknown entity '" +
                                                e.get<std::string>() + "'");
                }
                r.entity = static_cast<int>(it - entity_names.begin());
            }
        }
        if (j.contains("msg") && j["msg"].is_string()) r.message = j["msg"].get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

Json ground_truth_to_json(const simgen::IncidentDataset& data) {
    const auto& s = data.ground_truth;
    Json j;
    j["n_entities"] = s.n_entities;
    j["entity_names"] = data.entity_names;
    j["kpi_name"] = data.kpi_name;
    Json dag = Json::array();
    for (int i = 0; i < s.n_entities; ++i) {
        Json row = Json::array();
        for (int k = 0; k < s.n_entities; ++k) row.push_back(s.ground_truth_dag(i, k));
        dag.push_back(row);
    }
    j["ground_truth_dag"] = dag;
    j["root_cause"] = s.root_cause;
    j["root_cause_name"] = data.entity_names[static_cast<std::size_t>(s.root_cause)];
    j["fault_type"] = std::string(simgen::to_string(s.fault_type));
    j["horizon"] = s.horizon;
    j["noise_std"] = s.noise_std;
    j["seed"] = s.seed;
    j["kpi_parents"] = simgen::resolved_kpi_parents(s);
    j["lag_order"] = s.lag_order;
    j["metric_kinds"] = s.metric_kinds;
    j["fault_onset"] = data.fault_onset;
    j["shock_magnitude"] = data.shock_magnitude;
    j["edge_weights"] = matrix_to_json(data.edge_weights);
    return j;
}

GroundTruth ground_truth_from_json(const Json& j) {
    GroundTruth g;
    auto& s = g.spec;
    s.n_entities = j.at("n_entities").get<int>();
    const auto& dag = j.at("ground_truth_dag");
    s.ground_truth_dag = Eigen::MatrixXi::Zero(s.n_entities, s.n_entities);
    if (static_cast<int>(dag.size()) != s.n_entities) throw std::invalid_argument("ground truth DAG has the wrong size");
    for (int i = 0; i < s.n_entities; ++i) {
        if (static_cast<int>(dag[i].size()) != s.n_entities) throw std::invalid_argument("ground truth DAG is not square");
        for (int k = 0; k < s.n_entities; ++k) s.ground_truth_dag(i, k) = dag[i][k].get<int>();
    }
    s.root_cause = j.at("root_cause").get<int>();
    s.fault_type = simgen::fault_type_from_string(j.at("fault_type").get<std::string>());
    s.horizon = j.at("horizon").get<int>();
    s.noise_std = j.at("noise_std").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.kpi_parents = j.at("kpi_parents").get<std::vector<int>>();
    s.lag_order = j.at("lag_order").get<int>();
    s.metric_kinds = j.at("metric_kinds").get<std::vector<std::string>>();
    g.entity_names = j.at("entity_names").get<std::vector<std::string>>();
    g.kpi_name = j.at("kpi_name").get<std::string>();
    if (s.root_cause < 0 || s.root_cause >= static_cast<int>(g.entity_names.size())) {
        throw std::invalid_argument("ground truth root_cause out of range");
    }
    g.root_cause_name = g.entity_names[static_cast<std::size_t>(s.root_cause)];
    return g;
}

Json vocabulary_to_json(const std::vector<logs::LogTemplate>& vocabulary) {
    Json j = Json::object();
    for (const auto& t : vocabulary) j[std::to_string(t.template_id)] = t.pattern;
    return j;
}

std::vector<logs::LogTemplate> vocabulary_from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("vocabulary must be a JSON object of id -> pattern");
    std::vector<logs::LogTemplate> out;
    std::set<int> seen;
    for (const auto& [key, value] : j.items()) {
        int id = 0;
        try {
            std::size_t used = 0;
            id = std::stoi(key, &used);
            if (used != key.size()) throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw std::invalid_argument("vocabulary key '" + key + "' is not a template id");
        }
        if (!seen.insert(id).second) throw std::invalid_argument("duplicate template id " + key);
        out.push_back({id, value.get<std::string>()});
    }
    return out;
}

std::string windows_to_jsonl(const std::vector<logs::LogSequenceWindow>& windows) {
    std::string out;
    for (const auto& w : windows) {
        Json j;
        j["entity"] = w.entity;
        j["window_index"] = w.window_index;
        j["templates"] = w.templates;
        j["frequencies"] = w.frequencies;
        j["label"] = w.label;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<logs::LogSequenceWindow> windows_from_jsonl(const std::string& text) {
    std::vector<logs::LogSequenceWindow> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        Json j = parse_json(line, "windows line " + std::to_string(line_no));
        logs::LogSequenceWindow w;
        w.entity = j.at("entity").get<int>();
        w.window_index = j.at("window_index").get<int>();
        w.templates = j.at("templates").get<std::vector<int>>();
        w.frequencies = j.at("frequencies").get<std::vector<int>>();
        w.label = j.at("label").get<double>();
        if (w.templates.size() != w.frequencies.size() || w.templates.empty()) {
            throw std::invalid_argument("windows line " + std::to_string(line_no) + ": templates and frequencies disagree");
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::string matrices_to_bytes(const NamedMatrices& mats) {
    std::string bytes(kMagic, sizeof kMagic);
    put(bytes, kFormatVersion);
    put(bytes, static_cast<std::uint64_t>(mats.size()));
    for (const auto& [name, m] : mats) {
        put(bytes, static_cast<std::uint64_t>(name.size()));
        bytes += name;
        put(bytes, static_cast<std::int64_t>(m.rows()));
        put(bytes, static_cast<std::int64_t>(m.cols()));
        bytes.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
    }
    return bytes;
}

NamedMatrices matrices_from_bytes(const std::string& bytes) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("not a checkpoint file (bad magic)");
    }
    std::size_t pos = sizeof kMagic;
    if (take<std::uint32_t>(bytes, pos) != kFormatVersion) throw std::runtime_error("unsupported checkpoint version");
    const auto count = take<std::uint64_t>(bytes, pos);
    NamedMatrices out;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = take<std::uint64_t>(bytes, pos);
        if (pos + len > bytes.size()) throw std::runtime_error("checkpoint truncated");
        std::string name = bytes.substr(pos, len);
        pos += len;
        const auto rows = take<std::int64_t>(bytes, pos);
        const auto cols = take<std::int64_t>(bytes, pos);
        if (rows < 0 || cols < 0) throw std::runtime_error("checkpoint has negative dimensions");
        const auto n = static_cast<std::size_t>(rows * cols);
        if (pos + n * sizeof(double) > bytes.size()) throw std::runtime_error("checkpoint truncated");
        Eigen::MatrixXd m(rows, cols);
        std::memcpy(m.data(), bytes.data() + pos, n * sizeof(double));
        pos += n * sizeof(double);
        out.emplace_back(std::move(name), std::move(m));
    }
    if (pos != bytes.size()) throw std::runtime_error("trailing bytes in checkpoint");
    return out;
}

NamedMatrices encoder_checkpoint(const encoder::LogEncoder& enc, const encoder::ReducedSeries& reduced) {
    NamedMatrices out;
    for (const auto& p : enc.parameters()) out.emplace_back(p.name, p.value);
    out.emplace_back("pca.direction", Eigen::MatrixXd(reduced.direction));
    out.emplace_back("pca.mean", Eigen::MatrixXd(reduced.mean));
    return out;
}

Json encoder_manifest(const encoder::LogEncoder& enc, const encoder::ReducedSeries& reduced,
                      const std::vector<logs::LogTemplate>& vocabulary, int truncated_tokens) {
    Json j;
    j["config"] = encoder_config_to_json(enc.config());
    j["n_templates"] = enc.n_templates();
    j["vocabulary_hash"] = hex64(fnv1a(vocabulary_to_json(vocabulary).dump()));
    j["explained_variance"] = reduced.explained_variance;
    j["degenerate"] = reduced.degenerate;
    j["truncated_tokens"] = truncated_tokens;
    j["loss_history"] = enc.loss_history();
    return j;
}

encoder::LogEncoder encoder_from_checkpoint(const NamedMatrices& mats, const Json& manifest,
                                            encoder::ReducedSeries* reduced) {
    const auto config = encoder_config_from_json(manifest.at("config"));
    encoder::LogEncoder enc(config, manifest.at("n_templates").get<int>());
    std::map<std::string, const Eigen::MatrixXd*> by_name;
    for (const auto& [name, m] : mats) by_name[name] = &m;
    for (auto& p : enc.parameters()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint lacks parameter '" + p.name + "'");
        if (it->second->rows() != p.value.rows() || it->second->cols() != p.value.cols()) {
            throw std::runtime_error("checkpoint parameter '" + p.name + "' has the wrong shape");
        }
        p.value = *it->second;
    }
    enc.loss_history() = manifest.value("loss_history", std::vector<double>{});
    if (reduced) {
        auto d = by_name.find("pca.direction");
        auto m = by_name.find("pca.mean");
        if (d == by_name.end() || m == by_name.end()) throw std::runtime_error("checkpoint lacks the PCA direction");
        reduced->direction = *d->second;
        reduced->mean = *m->second;
        reduced->explained_variance = manifest.value("explained_variance", 0.0);
        reduced->degenerate = manifest.value("degenerate", false);
    }
    return enc;
}

NamedMatrices structure_checkpoint(const causal::LearnedStructure& s) {
    NamedMatrices out;
    for (const auto& p : s.parameters) out.emplace_back(p.name, p.value);
    out.emplace_back("a_metric", s.a_metric);
    out.emplace_back("a_log", s.a_log);
    return out;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
    if (!j.is_array()) throw std::invalid_argument("matrix must be a nested array");
    const auto r = static_cast<Eigen::Index>(j.size());
    const auto c = r == 0 ? 0 : static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != c) throw std::invalid_argument("matrix rows differ in length");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

Json adjacency_to_json(const AdjacencyExport& a) {
    Json j;
    j["node_names"] = a.node_names;
    j["a_metric"] = matrix_to_json(a.a_metric);
    j["a_log"] = matrix_to_json(a.a_log);
    j["attention"] = {{"a_log", a.attention.a_log}, {"a_metric", a.attention.a_metric}};
    j["converged"] = a.converged;
    j["final_losses"] = breakdown_to_json(a.final_losses);
    return j;
}

Json adjacency_to_json(const causal::LearnedStructure& s) {
    AdjacencyExport a;
    a.node_names = s.node_names;
    a.a_metric = s.a_metric;
    a.a_log = s.a_log;
    a.attention = s.attention;
    a.converged = s.converged;
    if (!s.loss_history.empty()) a.final_losses = s.loss_history.back();
    return adjacency_to_json(a);
}

AdjacencyExport adjacency_from_json(const Json& j) {
    AdjacencyExport a;
    a.node_names = j.at("node_names").get<std::vector<std::string>>();
    a.a_metric = matrix_from_json(j.at("a_metric"));
    a.a_log = matrix_from_json(j.at("a_log"));
    a.attention.a_log = j.at("attention").at("a_log").get<double>();
    a.attention.a_metric = j.at("attention").at("a_metric").get<double>();
    a.converged = j.at("converged").get<bool>();
    a.final_losses = breakdown_from_json(j.at("final_losses"));
    return a;
}

Json fused_to_json(const fusion::FusedCausalGraph& g) {
    Json j;
    j["a_log"] = g.a_log;
    j["a_metric"] = g.a_metric;
    j["node_names"] = g.node_names;
    j["adjacency"] = matrix_to_json(g.adjacency);
    return j;
}

fusion::FusedCausalGraph fused_from_json(const Json& j) {
    fusion::FusedCausalGraph g;
    g.a_log = j.at("a_log").get<double>();
    g.a_metric = j.at("a_metric").get<double>();
    g.node_names = j.at("node_names").get<std::vector<std::string>>();
    g.adjacency = matrix_from_json(j.at("adjacency"));
    if (g.adjacency.rows() != g.adjacency.cols() || g.adjacency.rows() != static_cast<Eigen::Index>(g.node_names.size())) {
        throw std::invalid_argument("fused graph adjacency does not match its node names");
    }
    return g;
}

Json ranking_to_json(const rca::RankedRootCauses& r, const std::string& incident_id) {
    Json j;
    j["incident_id"] = incident_id;
    Json list = Json::array();
    for (std::size_t i = 0; i < r.ranking.size(); ++i) {
        list.push_back({{"entity", r.ranking[i].entity}, {"score", r.ranking[i].score}, {"rank", i + 1}});
    }
    j["ranking"] = list;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    return j;
}

RankingFile ranking_from_json(const Json& j) {
    RankingFile r;
    r.incident_id = j.at("incident_id").get<std::string>();
    for (const auto& e : j.at("ranking")) {
        r.entities.push_back(e.at("entity").get<std::string>());
        r.scores.push_back(e.at("score").get<double>());
    }
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    return r;
}

Json report_to_json(const MetricsReport& r) {
    Json j;
    j["n_cases"] = r.n_cases;
    Json pr = Json::object();
    Json map = Json::object();
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        pr[std::to_string(r.k_values[i])] = r.precision[i];
        map[std::to_string(r.k_values[i])] = r.map[i];
    }
    j["precision_at_k"] = pr;
    j["map_at_k"] = map;
    j["mrr"] = r.mrr;
    return j;
}

std::string report_to_table(const MetricsReport& r) {
    std::ostringstream os;
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-8s %10s %10s\n", "K", "PR@K", "MAP@K");
    os << buf;
    for (std::size_t i = 0; i < r.k_values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%-8d %10.4f %10.4f\n", r.k_values[i], r.precision[i], r.map[i]);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "MRR %.4f over %d case(s)\n", r.mrr, r.n_cases);
    os << buf;
    return os.str();
}

Json config_to_json(const pipeline::PipelineConfig& c) {
    Json j;
    j["data_dir"] = c.data_dir;
    j["out_dir"] = c.out_dir;
    j["incident_id"] = c.incident_id;
    j["seed"] = c.seed;
    const auto& s = c.simulation;
    Json sim;
    sim["n_entities"] = s.n_entities;
    sim["fault_type"] = std::string(simgen::to_string(s.fault_type));
    sim["horizon"] = s.horizon;
    sim["noise_std"] = s.noise_std;
    sim["edge_prob"] = s.edge_prob;
    sim["dag"] = s.dag;
    sim["root_cause"] = s.root_cause;
    sim["kpi_parents"] = s.kpi_parents;
    sim["metric_kinds"] = s.metric_kinds;
    j["simulation"] = sim;
    j["window_size"] = c.window_size;
    j["metric_name"] = c.metric_name;
    j["golden_signals"] = c.golden_signals;
    j["encoder"] = encoder_config_to_json(c.encoder);
    j["learner"] = learner_config_to_json(c.learner);
    j["fusion"] = {{"tau", c.fusion.tau},
                   {"k", c.fusion.k},
                   {"mode", c.fusion.mode == fusion::CorrelationMode::normalized ? "normalized" : "raw"}};
    j["rca"] = {{"beta", c.rca.beta}, {"restart", c.rca.restart}, {"tol", c.rca.tol}, {"max_iter", c.rca.max_iter}};
    j["edge_prune"] = c.edge_prune;
    j["eval_k"] = c.eval_k;
    return j;
}

pipeline::PipelineConfig config_from_json(const Json& j) {
    require_keys(j, {"data_dir", "out_dir", "incident_id", "seed", "simulation", "window_size", "metric_name",
                     "golden_signals", "encoder", "learner", "fusion", "rca", "edge_prune", "eval_k"},
                 "config");
    pipeline::PipelineConfig c;
    try {
        read_opt(j, "data_dir", c.data_dir);
        read_opt(j, "out_dir", c.out_dir);
        read_opt(j, "incident_id", c.incident_id);
        read_opt(j, "seed", c.seed);
        if (j.contains("simulation")) {
            const auto& s = j.at("simulation");
            require_keys(s, {"n_entities", "fault_type", "horizon", "noise_std", "edge_prob", "dag", "root_cause",
                             "kpi_parents", "metric_kinds"},
                         "simulation");
            auto& d = c.simulation;
            read_opt(s, "n_entities", d.n_entities);
            if (s.contains("fault_type")) d.fault_type = simgen::fault_type_from_string(s.at("fault_type").get<std::string>());
            read_opt(s, "horizon", d.horizon);
            read_opt(s, "noise_std", d.noise_std);
            read_opt(s, "edge_prob", d.edge_prob);
            read_opt(s, "dag", d.dag);
            read_opt(s, "root_cause", d.root_cause);
            read_opt(s, "kpi_parents", d.kpi_parents);
            read_opt(s, "metric_kinds", d.metric_kinds);
            if (!d.dag.empty()) d.n_entities = static_cast<int>(d.dag.size());
        }
        read_opt(j, "window_size", c.window_size);
        read_opt(j, "metric_name", c.metric_name);
        read_opt(j, "golden_signals", c.golden_signals);
        if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
        if (j.contains("learner")) c.learner = learner_config_from_json(j.at("learner"));
        if (j.contains("fusion")) {
            const auto& f = j.at("fusion");
            require_keys(f, {"tau", "k", "mode"}, "fusion");
            read_opt(f, "tau", c.fusion.tau);
            read_opt(f, "k", c.fusion.k);
            if (f.contains("mode")) {
                const auto m = f.at("mode").get<std::string>();
                if (m == "normalized") {
                    c.fusion.mode = fusion::CorrelationMode::normalized;
                } else if (m == "raw") {
                    c.fusion.mode = fusion::CorrelationMode::raw;
                } else {
                    throw std::invalid_argument("fusion.mode must be normalized or raw");
                }
            }
        }
        if (j.contains("rca")) {
            const auto& r = j.at("rca");
            require_keys(r, {"beta", "restart", "tol", "max_iter"}, "rca");
            read_opt(r, "beta", c.rca.beta);
            read_opt(r, "restart", c.rca.restart);
            read_opt(r, "tol", c.rca.tol);
            read_opt(r, "max_iter", c.rca.max_iter);
        }
        read_opt(j, "edge_prune", c.edge_prune);
        read_opt(j, "eval_k", c.eval_k);
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("config has a field of the wrong type: ") + e.what());
    }
    return c;
}

std::string config_hash(const pipeline::PipelineConfig& c) { return hex64(fnv1a(config_to_json(c).dump())); }

}  // namespace mmrca::io
