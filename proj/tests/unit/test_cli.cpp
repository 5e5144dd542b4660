#include "mmrca/io.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;
using mmrca::io::read_file;

namespace {

struct Result {
    int code = -1;
    std::string output;  // stdout and stderr
};

Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + MMRCA_CLI + " " + args + " 2>&1";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("mmrca_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small sizes so every command finishes in a second or two.
std::string quick_config(const fs::path& dir, const std::string& extra = "") {
    const auto path = dir / "config.json";
    mmrca::io::write_file(path, R"({
  "simulation": {"n_entities": 3, "horizon": 60},
  "encoder": {"d_model": 8, "n_layers": 1, "n_heads": 2, "epochs": 3},
  "learner": {"d1": 4, "d2": 4, "epochs": 80})" + extra + "\n}\n");
    return path.string();
}

std::string dirs(const fs::path& dir) {
    return "--data " + (dir / "data").string() + " --out " + (dir / "out").string();
}

}  // namespace

TEST_CASE("simulate is byte-identical for a fixed seed") {
    auto dir = fresh_dir("sim");
    const auto cfg = quick_config(dir);
    auto a = run("simulate --config " + cfg + " --seed 5 --out " + (dir / "a").string());
    auto b = run("simulate --config " + cfg + " --seed 5 --out " + (dir / "b").string());
    auto c = run("simulate --config " + cfg + " --seed 6 --out " + (dir / "c").string());
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    REQUIRE(c.code == 0);
    for (const char* f : {"metrics.csv", "logs.jsonl", "ground_truth.json"}) {
        CAPTURE(f);
        CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
    }
    CHECK(read_file(dir / "a" / "metrics.csv") != read_file(dir / "c" / "metrics.csv"));
    fs::remove_all(dir);
}

TEST_CASE("a cyclic ground-truth DAG is a validation error") {
    auto dir = fresh_dir("cyclic");
    mmrca::io::write_file(dir / "cyclic.json", R"({"simulation": {"dag": [[0,1,0],[0,0,1],[1,0,0]]}})");
    auto r = run("simulate --config " + (dir / "cyclic.json").string() + " --out " + (dir / "data").string());
    CHECK(r.code == 1);
    CHECK(r.output.find("acyclic") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "data" / "metrics.csv"));
    fs::remove_all(dir);
}

TEST_CASE("bad arguments and configuration exit with status 1") {
    auto dir = fresh_dir("args");
    mmrca::io::write_file(dir / "bad.json", R"({"learner": {"lambda_6": 1}})");
    auto unknown = run("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "d").string());
    CHECK(unknown.code == 1);
    CHECK(unknown.output.find("lambda_6") != std::string::npos);
    CHECK(run("simulate --seed abc --out " + (dir / "d").string()).code == 1);
    CHECK(run("").code != 0);
    CHECK(run("frobnicate").code != 0);
    mmrca::io::write_file(dir / "neg.json", R"({"learner": {"lambda_var": -1}})");
    CHECK(run("simulate --config " + (dir / "neg.json").string() + " --out " + (dir / "d").string()).code == 1);
    fs::remove_all(dir);
}

TEST_CASE("a missing input names the failing stage and exits with status 2") {
    auto dir = fresh_dir("missing");
    const auto cfg = quick_config(dir);
    REQUIRE(run("simulate --config " + cfg + " --out " + (dir / "data").string()).code == 0);
    fs::remove(dir / "data" / "logs.jsonl");
    auto r = run("run-pipeline --config " + cfg + " " + dirs(dir));
    CHECK(r.code == 2);
    CHECK(r.output.find("log_ingest") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("run-pipeline is repeatable and matches the staged commands") {
    auto dir = fresh_dir("pipeline");
    const auto cfg = quick_config(dir);
    auto first = run("run-pipeline --simulate --config " + cfg + " --seed 9 " + dirs(dir));
    REQUIRE(first.code == 0);
    CHECK(first.output.find("MRR") != std::string::npos);
    for (const char* f : {"vocabulary.json", "windows.jsonl", "encoder.ckpt", "encoder_manifest.json", "log_panel.csv",
                          "attention.json", "adjacency.json", "structure.ckpt", "losses.csv", "fused.json", "fused.dot",
                          "ranking.json", "report.json", "manifest.json"}) {
        CAPTURE(f);
        CHECK(fs::exists(dir / "out" / f));
        auto partial = dir / "out" / f;
        partial += ".partial";
        CHECK_FALSE(fs::exists(partial));
    }
    const auto ranking = read_file(dir / "out" / "ranking.json");
    auto second = run("run-pipeline --config " + cfg + " --seed 9 " + dirs(dir));
    REQUIRE(second.code == 0);
    CHECK(read_file(dir / "out" / "ranking.json") == ranking);

    const auto staged = "--config " + cfg + " --seed 9 --data " + (dir / "data").string() + " --out " +
                        (dir / "staged").string();
    for (const char* cmd : {"parse", "encode", "learn", "localize", "evaluate"}) {
        CAPTURE(cmd);
        CHECK(run(std::string(cmd) + " " + staged).code == 0);
    }
    CHECK(read_file(dir / "staged" / "ranking.json") == ranking);
    CHECK(read_file(dir / "staged" / "adjacency.json") == read_file(dir / "out" / "adjacency.json"));

    auto manifest = mmrca::io::parse_json(read_file(dir / "staged" / "manifest.json"), "manifest");
    CHECK(manifest.at("seed").get<std::uint64_t>() == 9);
    CHECK(manifest.at("last_command") == "evaluate");
    for (const char* stage : {"log_ingest", "log_encoder", "fusion", "causal_learner", "rca", "metrics"}) {
        CAPTURE(stage);
        CHECK(manifest.at("stage_seconds").contains(stage));
    }

    auto eval = run("evaluate --case " + (dir / "out" / "ranking.json").string() + "," +
                    (dir / "data" / "ground_truth.json").string() + " --out " + (dir / "eval").string());
    CHECK(eval.code == 0);
    auto report = mmrca::io::parse_json(read_file(dir / "eval" / "report.json"), "report");
    CHECK(report.at("n_cases") == 1);
    const double mrr = report.at("mrr").get<double>();
    CHECK(mrr > 0.0);
    CHECK(mrr <= 1.0);
    fs::remove_all(dir);
}

TEST_CASE("environment overrides sit between the config file and flags") {
    auto dir = fresh_dir("env");
    const auto cfg = quick_config(dir, R"(,
  "seed": 3)");
    auto r = run("simulate --config " + cfg, "MMRCA_SEED=11 MMRCA_DATA_DIR=" + (dir / "envdata").string());
    REQUIRE(r.code == 0);
    auto truth = mmrca::io::parse_json(read_file(dir / "envdata" / "ground_truth.json"), "truth");
    CHECK(truth.at("seed").get<std::uint64_t>() == 11);
    auto flag = run("simulate --config " + cfg + " --seed 12", "MMRCA_SEED=11 MMRCA_DATA_DIR=" + (dir / "envdata").string());
    REQUIRE(flag.code == 0);
    truth = mmrca::io::parse_json(read_file(dir / "envdata" / "ground_truth.json"), "truth");
    CHECK(truth.at("seed").get<std::uint64_t>() == 12);
    CHECK(run("simulate --config " + cfg, "MMRCA_SEED=x MMRCA_DATA_DIR=" + (dir / "envdata").string()).code == 1);
    fs::remove_all(dir);
}
