#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fedgcv/datagen.hpp"
#include "fedgcv/errors.hpp"
#include "fedgcv/pipeline.hpp"

using namespace fedgcv;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

ExperimentConfig toy_config(const std::string& out_dir) {
    ExperimentConfig cfg = parse_config_json(R"({
        "dataset": {"generate": "toy"},
        "partition": {"k": 3},
        "federation": {"rounds": 3, "local": {"epochs": 2}},
        "unlearn": {"epochs": 2},
        "virtual": {"epochs": 15, "repair_rounds": 2, "z_dim": 3, "hidden": 4},
        "model": {"hidden": 6},
        "seed": 7
    })");
    cfg.out_dir = out_dir;
    return cfg;
}

} // namespace

TEST_CASE("empty config object fills every §-style default") {
    const ExperimentConfig cfg = parse_config_json(R"({"dataset": {"generate": "toy"}})");
    CHECK(cfg.fed.rounds == 30);
    CHECK(cfg.partition.k == 10);
    CHECK(cfg.fed.participation == 1.0);
    CHECK(cfg.fed.local.lr == doctest::Approx(1e-2));
    CHECK(cfg.fed.local.weight_decay == doctest::Approx(5e-4));
    CHECK(cfg.fed.local.dropout == doctest::Approx(0.5));
    CHECK(cfg.fed.local.batch == 128);
    CHECK(cfg.hidden == 64);
    CHECK(cfg.seed == 2025);
    CHECK(cfg.unlearn.epochs == 30);
    CHECK(cfg.unlearn.lr == doctest::Approx(2e-2));
    CHECK(cfg.unlearn.dropout == doctest::Approx(0.3));
    CHECK(cfg.unlearn.npo_beta == doctest::Approx(5.0));
    CHECK(cfg.unlearn.scale == doctest::Approx(50.0));
    CHECK(cfg.unlearn.clip == doctest::Approx(10.0));
    CHECK(cfg.unlearn.drift_radius == doctest::Approx(10.0));
    CHECK(cfg.unlearn.margin == doctest::Approx(0.5));
    CHECK(cfg.unlearn.margin_weight == doctest::Approx(3.0));
    CHECK(cfg.virt.repair_rounds == 5);
    CHECK(cfg.virt.gamma == doctest::Approx(0.7));
    CHECK(cfg.virt.sigma_x == doctest::Approx(0.1));
}

TEST_CASE("config bound violations carry the key path") {
    try {
        parse_config_json(R"({"dataset":{"generate":"toy"},"unlearn":{"beta":-1}})");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config);
        CHECK(std::string(e.what()).find("unlearn.beta") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_json(R"({"dataset":{"generate":"toy"},"nonsense":1})"), Error);
    CHECK_THROWS_AS(parse_config_json("{nope"), Error);
    CHECK_THROWS_AS(
        parse_config_json(R"({"dataset":{"generate":"toy"},"federation":{"participation":0.0}})"),
        Error);
}

TEST_CASE("config round-trip: parse, serialize, parse is identical") {
    const ExperimentConfig a = toy_config("/tmp/x");
    const std::string text = config_to_json(a);
    const ExperimentConfig b = parse_config_json(text);
    CHECK(config_to_json(b) == text);
    CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("config hash ignores the output directory") {
    ExperimentConfig a = toy_config("/tmp/a");
    ExperimentConfig b = toy_config("/tmp/b");
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 8;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("sweep value setter validates keys and bounds") {
    ExperimentConfig cfg = toy_config("/tmp/x");
    set_config_value(cfg, "tau", 20.0);
    CHECK(cfg.unlearn.drift_radius == doctest::Approx(20.0));
    set_config_value(cfg, "unlearn.beta", 2.0);
    CHECK(cfg.unlearn.npo_beta == doctest::Approx(2.0));
    CHECK_THROWS_AS(set_config_value(cfg, "unlearn.tau", -1.0), Error);
    CHECK_THROWS_AS(set_config_value(cfg, "bogus.key", 1.0), Error);
}

TEST_CASE("phase parsing") {
    const auto phases = parse_phases_csv("train,unlearn,repair");
    REQUIRE(phases.size() == 3);
    CHECK(phases[0] == Phase::train);
    CHECK(phases[2] == Phase::repair);
    CHECK_THROWS_AS(parse_phases_csv("train,bogus"), Error);
    CHECK_THROWS_AS(parse_phases_csv(""), Error);
}

TEST_CASE("pipeline: train-only smoke run on the toy benchmark") {
    const fs::path dir = fs::temp_directory_path() / "fedgcv_pipe_smoke";
    fs::remove_all(dir);
    const ExperimentConfig cfg = toy_config(dir.string());
    const auto report = run_pipeline(cfg, {Phase::train});
    REQUIRE(report.find("train") != nullptr);
    const auto& train = *report.find("train");
    CHECK(train.scalars.count("accuracy"));
    CHECK(train.scalars.count("mia_rate_pre"));
    CHECK(train.curves.at("test_acc").size() == 3);
    fs::remove_all(dir);
}

TEST_CASE("pipeline: unlearn without a train checkpoint is a dependency error") {
    const fs::path dir = fs::temp_directory_path() / "fedgcv_pipe_dep";
    fs::remove_all(dir);
    const ExperimentConfig cfg = toy_config(dir.string());
    try {
        run_pipeline(cfg, {Phase::unlearn});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::phase_dependency);
    }
    fs::remove_all(dir);
}

TEST_CASE("pipeline: checkpoint resume reproduces the uninterrupted report") {
    const fs::path dir_a = fs::temp_directory_path() / "fedgcv_pipe_full";
    const fs::path dir_b = fs::temp_directory_path() / "fedgcv_pipe_resumed";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    ExperimentConfig cfg_a = toy_config(dir_a.string());
    const auto full = run_pipeline(cfg_a, {Phase::train, Phase::unlearn, Phase::repair});

    // Interrupted twin: run train only, then resume with unlearn + repair.
    ExperimentConfig cfg_b = toy_config(dir_b.string());
    run_pipeline(cfg_b, {Phase::train});
    const auto resumed = run_pipeline(cfg_b, {Phase::unlearn, Phase::repair});

    const auto* ua = full.find("unlearn");
    const auto* ub = resumed.find("unlearn");
    REQUIRE(ua);
    REQUIRE(ub);
    CHECK(ua->scalars.at("accuracy") == ub->scalars.at("accuracy"));
    CHECK(ua->scalars.at("mia_rate_post") == ub->scalars.at("mia_rate_post"));
    const auto* ra = full.find("repair");
    const auto* rb = resumed.find("repair");
    REQUIRE(ra);
    REQUIRE(rb);
    CHECK(ra->scalars.at("accuracy") == rb->scalars.at("accuracy"));
    CHECK(ra->scalars.at("mia_rate_final") == rb->scalars.at("mia_rate_final"));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("full run is reproducible: byte-identical report.json") {
    const fs::path dir1 = fs::temp_directory_path() / "fedgcv_repro1";
    const fs::path dir2 = fs::temp_directory_path() / "fedgcv_repro2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    ExperimentConfig c1 = toy_config(dir1.string());
    ExperimentConfig c2 = toy_config(dir2.string());
    c2.out_dir = dir2.string();
    const auto r1 = run_pipeline(c1, {Phase::train, Phase::unlearn});
    const auto r2 = run_pipeline(c2, {Phase::train, Phase::unlearn});

    // out_dir differs inside the config snapshot; normalize it before diffing
    ResultsReport n1 = r1, n2 = r2;
    n1.config.out_dir = n2.config.out_dir = "out";
    CHECK(report_to_json(n1) == report_to_json(n2));
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("emit_results writes a deterministic trio of files") {
    const fs::path dir = fs::temp_directory_path() / "fedgcv_emit";
    fs::remove_all(dir);
    ResultsReport report;
    report.config = toy_config((dir / "out").string());
    PhaseResult pr;
    pr.name = "train";
    pr.scalars["accuracy"] = 0.75;
    pr.curves["test_acc"] = {0.1, 0.5, 0.75};
    pr.seconds = 12.5;
    report.phases.push_back(pr);
    SweepPointResult sp;
    sp.value = 10.0;
    sp.seed = 7;
    sp.accuracy = 0.7;
    sp.mia_rate = 0.05;
    report.sweep_points.push_back(sp);

    emit_results(report, dir.string());
    CHECK(fs::exists(dir / "report.json"));
    CHECK(fs::exists(dir / "metrics.csv"));
    CHECK(fs::exists(dir / "curves.csv"));
    CHECK(fs::exists(dir / "run_info.json"));

    const auto parsed = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(parsed["format_version"] == 1);
    CHECK(parsed["phases"]["train"]["metrics"]["accuracy"] == doctest::Approx(0.75));

    // curves.csv rows = header + series lengths
    const std::string curves = slurp(dir / "curves.csv");
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 1 + 3);

    // re-emit: byte-identical deterministic payloads
    const std::string report_a = slurp(dir / "report.json");
    const std::string metrics_a = slurp(dir / "metrics.csv");
    const std::string curves_a = slurp(dir / "curves.csv");
    emit_results(report, dir.string());
    CHECK(slurp(dir / "report.json") == report_a);
    CHECK(slurp(dir / "metrics.csv") == metrics_a);
    CHECK(slurp(dir / "curves.csv") == curves_a);
    fs::remove_all(dir);
}

TEST_CASE("sweep: per-point summaries over seeds") {
    ExperimentConfig cfg = toy_config((fs::temp_directory_path() / "fedgcv_sweep").string());
    cfg.sweep.seeds = 2;
    const auto report = run_sweep(cfg, "tau", {5.0, 10.0});
    CHECK(report.sweep_points.size() == 4); // 2 values x 2 seeds
    int found = 0;
    for (const auto& p : report.phases)
        if (p.name.rfind("sweep_", 0) == 0) {
            ++found;
            CHECK(p.scalars.count("accuracy_mean"));
            CHECK(p.scalars.count("accuracy_std"));
            CHECK(p.scalars.count("mia_rate_mean"));
        }
    CHECK(found == 2);
}
