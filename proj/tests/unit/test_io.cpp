#include "mmrca/io.hpp"
#include "mmrca/pipeline.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace mmrca;
namespace fs = std::filesystem;

namespace {

simgen::IncidentDataset small_incident(std::uint64_t seed) {
    return simgen::generate_incident(simgen::random_scenario(4, simgen::FaultType::both, 40, 0.05, seed));
}

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("mmrca_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

// Perturbs one leaf of the config JSON to a different value that still parses.
void perturb(io::Json& leaf, const std::string& key) {
    if (key == "fault_type") {
        leaf = leaf.get<std::string>() == "both" ? "log_only" : "both";
    } else if (key == "mode") {
        leaf = leaf.get<std::string>() == "raw" ? "normalized" : "raw";
    } else if (key == "node_loss_form") {
        leaf = leaf.get<std::string>() == "info_nce" ? "cosine_ratio" : "info_nce";
    } else if (leaf.is_boolean()) {
        leaf = !leaf.get<bool>();
    } else if (leaf.is_number_float()) {
        leaf = leaf.get<double>() + 0.5;
    } else if (leaf.is_number_unsigned()) {
        leaf = leaf.get<std::uint64_t>() + 1;
    } else if (leaf.is_number_integer()) {
        leaf = leaf.get<std::int64_t>() + 1;
    } else if (leaf.is_string()) {
        leaf = leaf.get<std::string>() + "x";
    } else if (key == "dag") {
        leaf = io::Json::parse("[[0,1],[0,0]]");
    } else if (key == "golden_signals" || key == "metric_kinds") {
        leaf.push_back("latency");
    } else if (leaf.is_array()) {
        leaf.push_back(7);
    }
}

void collect_paths(const io::Json& j, const std::string& prefix, std::vector<std::string>& out) {
    for (const auto& [key, value] : j.items()) {
        const auto path = prefix + "/" + key;
        if (value.is_object()) {
            collect_paths(value, path, out);
        } else {
            out.push_back(path);
        }
    }
}

}  // namespace

TEST_CASE("metric CSV round trip is exact") {
    auto data = small_incident(3);
    const auto csv = io::panels_to_csv(data.metric_panels, data.metric_names);
    auto back = io::panels_from_csv(csv);
    REQUIRE(back.panels.size() == data.metric_panels.size());
    CHECK(back.metric_names == data.metric_names);
    for (std::size_t k = 0; k < back.panels.size(); ++k) {
        CHECK(back.panels[k].values == data.metric_panels[k].values);
        CHECK(back.panels[k].entity_names == data.metric_panels[k].entity_names);
        CHECK(back.panels[k].kpi_name == data.metric_panels[k].kpi_name);
    }
    CHECK(io::panels_to_csv(back.panels, back.metric_names) == csv);
}

TEST_CASE("metric CSV rejects malformed input") {
    CHECK_THROWS_AS(io::panels_from_csv("t,entity,metric_name,value\n"), std::invalid_argument);
    const std::string head = "timestamp,entity,metric_name,value\n";
    CHECK_THROWS_AS(io::panels_from_csv(head + "0,a,cpu,1\n0,kpi,kpi,2\n0,a,cpu,3\n"), std::invalid_argument);
    CHECK_THROWS_AS(io::panels_from_csv(head + "0,a,cpu,1\n1,kpi,kpi,2\n0,kpi,kpi,2\n"), std::invalid_argument);
    CHECK_THROWS_AS(io::panels_from_csv(head + "0,a,cpu,abc\n0,kpi,kpi,2\n"), std::invalid_argument);
    CHECK_THROWS_AS(io::panels_from_csv(head + "0,a,cpu\n"), std::invalid_argument);
    CHECK_THROWS_AS(io::panels_from_csv(head + "0,a,cpu,1\n"), std::invalid_argument);
    auto ok = io::panels_from_csv(head + "0,a,cpu,1\n1,a,cpu,2\n0,y,kpi,5\n1,y,kpi,6\n");
    REQUIRE(ok.panels.size() == 1);
    CHECK(ok.panels[0].values.rows() == 2);
    CHECK(ok.panels[0].values(1, 1) == 6.0);
    CHECK(ok.panels[0].kpi_name == "y");
}

TEST_CASE("logs JSONL round trip and entity names") {
    auto data = small_incident(4);
    auto back = io::logs_from_jsonl(io::logs_to_jsonl(data.raw_logs), data.entity_names);
    REQUIRE(back.size() == data.raw_logs.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].timestamp == data.raw_logs[i].timestamp);
        CHECK(back[i].entity == data.raw_logs[i].entity);
        CHECK(back[i].message == data.raw_logs[i].message);
    }
    auto named = io::logs_from_jsonl("{\"ts\":3,\"entity\":\"b\",\"msg\":\"x\"}\n", {"a", "b"});
    CHECK(named.at(0).entity == 1);
    CHECK_THROWS_AS(io::logs_from_jsonl("{\"ts\":3,\"entity\":\"c\",\"msg\":\"x\"}\n", {"a", "b"}),
                    std::invalid_argument);
    CHECK_THROWS_AS(io::logs_from_jsonl("{not json\n", {}), std::invalid_argument);
}

TEST_CASE("ground truth round trip") {
    auto data = small_incident(5);
    auto g = io::ground_truth_from_json(io::ground_truth_to_json(data));
    CHECK(g.spec.ground_truth_dag == data.ground_truth.ground_truth_dag);
    CHECK(g.spec.root_cause == data.ground_truth.root_cause);
    CHECK(g.spec.fault_type == data.ground_truth.fault_type);
    CHECK(g.spec.seed == data.ground_truth.seed);
    CHECK(g.spec.horizon == data.ground_truth.horizon);
    CHECK(g.entity_names == data.entity_names);
    CHECK(g.root_cause_name == data.entity_names[static_cast<std::size_t>(data.ground_truth.root_cause)]);
    // Regenerating from the stored scenario reproduces the data.
    auto again = simgen::generate_incident(g.spec);
    CHECK(again.metric_panels[0].values == data.metric_panels[0].values);
}

TEST_CASE("vocabulary and windows round trip") {
    std::vector<logs::LogTemplate> vocab = {{0, "GET <*> ok"}, {1, "error timeout <*>"}, {2, "disk full"}};
    CHECK(io::vocabulary_from_json(io::vocabulary_to_json(vocab)) == vocab);
    CHECK_THROWS_AS(io::vocabulary_from_json(io::Json::parse("{\"x\":\"a\"}")), std::invalid_argument);

    std::vector<logs::LogSequenceWindow> w(2);
    w[0] = {1, 0, {2, 0}, {3, 1}, 1.0};
    w[1] = {0, 4, {logs::kEmptyTemplate}, {0}, 0.0};
    auto back = io::windows_from_jsonl(io::windows_to_jsonl(w));
    REQUIRE(back.size() == 2);
    CHECK(back[0].templates == w[0].templates);
    CHECK(back[0].frequencies == w[0].frequencies);
    CHECK(back[0].label == 1.0);
    CHECK(back[1].is_empty_window());
    CHECK(back[1].window_index == 4);
    CHECK_THROWS_AS(io::windows_from_jsonl("{\"entity\":0,\"window_index\":0,\"templates\":[1],\"frequencies\":[],"
                                           "\"label\":0}\n"),
                    std::invalid_argument);
}

TEST_CASE("binary checkpoint round trip and corruption") {
    io::NamedMatrices mats = {{"a", random_matrix(3, 4, 1)}, {"empty", Eigen::MatrixXd(0, 2)}, {"b", random_matrix(1, 1, 2)}};
    const auto bytes = io::matrices_to_bytes(mats);
    auto back = io::matrices_from_bytes(bytes);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].first == mats[i].first);
        CHECK(back[i].second.rows() == mats[i].second.rows());
        CHECK(back[i].second.cols() == mats[i].second.cols());
        CHECK(back[i].second == mats[i].second);
    }
    CHECK(io::matrices_to_bytes(back) == bytes);
    CHECK_THROWS(io::matrices_from_bytes(bytes.substr(0, bytes.size() - 3)));
    CHECK_THROWS(io::matrices_from_bytes(bytes + "x"));
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(io::matrices_from_bytes(bad));
}

TEST_CASE("encoder checkpoint restores identical predictions") {
    encoder::EncoderConfig cfg;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.seed = 3;
    encoder::LogEncoder enc(cfg, 5);
    encoder::ReducedSeries reduced;
    reduced.direction = Eigen::VectorXd::Unit(8, 2);
    reduced.mean = Eigen::RowVectorXd::LinSpaced(8, 0.0, 1.0);
    reduced.explained_variance = 0.75;
    std::vector<logs::LogTemplate> vocab = {{0, "a"}, {1, "b"}, {2, "c"}, {3, "d"}, {4, "e"}};
    const auto manifest = io::encoder_manifest(enc, reduced, vocab, 0);
    const auto mats = io::matrices_from_bytes(io::matrices_to_bytes(io::encoder_checkpoint(enc, reduced)));
    encoder::ReducedSeries back_reduced;
    auto back = io::encoder_from_checkpoint(mats, io::Json::parse(manifest.dump()), &back_reduced);
    logs::LogSequenceWindow w{0, 0, {4, 1, 0}, {7, 1, 2}, 0.0};
    auto seq = encoder::tokenize(w, cfg);
    CHECK(back.predict(seq) == enc.predict(seq));
    CHECK(back.embed(seq) == enc.embed(seq));
    CHECK(back_reduced.direction == reduced.direction);
    CHECK(back_reduced.mean == reduced.mean);
    CHECK(back_reduced.explained_variance == 0.75);

    io::NamedMatrices missing(mats.begin() + 1, mats.end());
    CHECK_THROWS(io::encoder_from_checkpoint(missing, manifest));
}

TEST_CASE("adjacency export, import and export is byte-identical") {
    causal::LearnedStructure s;
    s.a_metric = random_matrix(4, 4, 7).cwiseAbs() / 3.0;
    s.a_log = random_matrix(4, 4, 8).cwiseAbs() / 7.0;
    s.node_names = {"svc-a", "svc-b", "svc-c", "kpi"};
    s.attention = {0.3, 0.7};
    s.converged = true;
    causal::LossBreakdown b;
    b.var = 1.0 / 3.0;
    b.total = 2.0 / 7.0;
    b.multiplier = 4.0;
    s.loss_history = {b};
    const auto first = io::adjacency_to_json(s).dump(2);
    const auto imported = io::adjacency_from_json(io::Json::parse(first));
    CHECK(imported.a_metric == s.a_metric);
    CHECK(imported.a_log == s.a_log);
    CHECK(io::adjacency_to_json(imported).dump(2) == first);
}

TEST_CASE("fused graph and ranking round trip") {
    fusion::FusedCausalGraph g;
    g.adjacency = random_matrix(3, 3, 9).cwiseAbs();
    g.node_names = {"a", "b", "kpi"};
    g.a_log = 0.25;
    g.a_metric = 0.75;
    auto back = io::fused_from_json(io::Json::parse(io::fused_to_json(g).dump()));
    CHECK(back.adjacency == g.adjacency);
    CHECK(back.node_names == g.node_names);
    g.node_names.pop_back();
    CHECK_THROWS_AS(io::fused_from_json(io::fused_to_json(g)), std::invalid_argument);

    rca::RankedRootCauses r;
    r.ranking = {{"b", 1, 0.6}, {"a", 0, 0.1}};
    r.converged = true;
    r.iterations = 17;
    auto f = io::ranking_from_json(io::Json::parse(io::ranking_to_json(r, "inc-1").dump()));
    CHECK(f.incident_id == "inc-1");
    CHECK(f.entities == std::vector<std::string>{"b", "a"});
    CHECK(f.scores == std::vector<double>{0.6, 0.1});
    CHECK(f.iterations == 17);
    CHECK(io::ranking_to_json(r, "x")["ranking"][1]["rank"] == 2);
}

TEST_CASE("config round trip and hash sensitivity") {
    pipeline::PipelineConfig base;
    const auto j = io::config_to_json(base);
    CHECK(io::config_to_json(io::config_from_json(j)) == j);
    CHECK(io::config_hash(io::config_from_json(j)) == io::config_hash(base));
    CHECK(io::config_hash(io::config_from_json(io::Json::object())) == io::config_hash(base));

    std::vector<std::string> paths;
    collect_paths(j, "", paths);
    CHECK(paths.size() > 40);
    for (const auto& path : paths) {
        CAPTURE(path);
        auto changed = j;
        const io::Json::json_pointer ptr(path);
        perturb(changed[ptr], ptr.back());
        REQUIRE(changed != j);
        CHECK(io::config_hash(io::config_from_json(changed)) != io::config_hash(base));
    }
}

TEST_CASE("config rejects unknown keys and wrong types") {
    CHECK_THROWS_WITH_AS(io::config_from_json(io::Json::parse("{\"bogus\":1}")), doctest::Contains("config.bogus"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(io::config_from_json(io::Json::parse("{\"learner\":{\"lambda6\":1}}")),
                         doctest::Contains("learner.lambda6"), std::invalid_argument);
    CHECK_THROWS_AS(io::config_from_json(io::Json::parse("{\"seed\":\"abc\"}")), std::invalid_argument);
    CHECK_THROWS_AS(io::config_from_json(io::Json::parse("{\"fusion\":{\"mode\":\"cubic\"}}")), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_json("{", "test"), std::invalid_argument);
}

TEST_CASE("write_file replaces atomically through a partial file") {
    auto dir = scratch_dir("write");
    auto target = dir / "sub" / "out.json";
    io::write_file(target, "first");
    CHECK(io::read_file(target) == "first");
    auto partial = target;
    partial += ".partial";
    // A stale partial from an interrupted run is overwritten, never read.
    io::write_file(partial, "stale");
    io::write_file(target, "second");
    CHECK(io::read_file(target) == "second");
    CHECK_FALSE(fs::exists(partial));
    CHECK_THROWS(io::read_file(dir / "missing"));
    fs::remove_all(dir);
}
