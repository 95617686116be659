#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedgcv/evaluation.hpp"

namespace fedgcv {

struct PartitionSpec {
    int k = 10;
    std::optional<std::uint64_t> seed; // absent = use the experiment seed
    std::optional<std::string> file;   // precomputed assignment
};

struct SweepSpec {
    std::string param = "unlearn.tau";
    std::vector<double> values;
    int seeds = 3;
};

struct ExperimentConfig {
    std::string dataset_path;
    std::optional<std::string> generate; // named synthetic benchmark instead of a file
    PartitionSpec partition;
    std::uint64_t seed = 2025;
    int target_client = 0;
    std::string out_dir = "out";
    std::string variant = "full";
    int hidden = 64;
    FedConfig fed;        // fed.seed/hidden mirrored from above at load
    UnlearnConfig unlearn;
    VirtualConfig virt;
    SweepSpec sweep;
    int workers = 1; // sweep parallelism; FEDGCV_THREADS overrides
};

ExperimentConfig default_config();
ExperimentConfig parse_config_json(const std::string& json_text);
ExperimentConfig parse_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Applies "a.b.c" = value onto a config (used by sweeps).
void set_config_value(ExperimentConfig& cfg, const std::string& key, double value);

enum class Phase { train, unlearn, repair, retrain, ablation, sweep };
Phase parse_phase(const std::string& name);
const char* phase_name(Phase p);
std::vector<Phase> parse_phases_csv(const std::string& csv);

struct PhaseResult {
    std::string name;
    std::map<std::string, double> scalars;
    // named series -> per-step values
    std::map<std::string, std::vector<double>> curves;
    double seconds = 0.0;
};

struct SweepPointResult {
    double value = 0.0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double mia_rate = 0.0;
};

struct ResultsReport {
    ExperimentConfig config;
    std::vector<PhaseResult> phases;
    std::vector<SweepPointResult> sweep_points;

    const PhaseResult* find(const std::string& name) const;
};

// Deterministic payload: excludes timings (those go to run_info.json).
std::string report_to_json(const ResultsReport& report);

ResultsReport run_pipeline(const ExperimentConfig& cfg, const std::vector<Phase>& phases);
ResultsReport run_sweep(const ExperimentConfig& cfg, const std::string& param,
                        const std::vector<double>& values);
ResultsReport run_ablation_pipeline(const ExperimentConfig& cfg, const std::string& variant);

// Writes report.json, metrics.csv, curves.csv (deterministic) and
// run_info.json (timings).
void emit_results(const ResultsReport& report, const std::string& dir);

Dataset load_experiment_dataset(const ExperimentConfig& cfg);

} // namespace fedgcv
