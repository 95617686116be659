#include "fedgcv/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "fedgcv/datagen.hpp"
#include "fedgcv/errors.hpp"
#include "fedgcv/partition.hpp"
#include "fedgcv/rng.hpp"

namespace fedgcv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double need_positive(const json& j, const char* path, double dflt) {
    if (!j.is_number()) fail(ErrorCode::config, std::string(path) + ": must be a number");
    const double v = j.get<double>();
    (void)dflt;
    if (v <= 0.0) fail(ErrorCode::config, std::string(path) + ": must be > 0");
    return v;
}

int need_int_min(const json& j, const char* path, int minimum) {
    if (!j.is_number_integer()) fail(ErrorCode::config, std::string(path) + ": must be an integer");
    const int v = j.get<int>();
    if (v < minimum)
        fail(ErrorCode::config,
             std::string(path) + ": must be >= " + std::to_string(minimum));
    return v;
}

double need_unit_interval(const json& j, const char* path, bool open_left, bool open_right) {
    if (!j.is_number()) fail(ErrorCode::config, std::string(path) + ": must be a number");
    const double v = j.get<double>();
    const bool lo_ok = open_left ? v > 0.0 : v >= 0.0;
    const bool hi_ok = open_right ? v < 1.0 : v <= 1.0;
    if (!lo_ok || !hi_ok) fail(ErrorCode::config, std::string(path) + ": out of range");
    return v;
}

} // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.fed.rounds = 30;
    cfg.fed.num_clients = 10;
    cfg.fed.participation = 1.0;
    cfg.fed.weight_rule = WeightRule::by_node_count;
    cfg.fed.local.lr = 1e-2;
    cfg.fed.local.weight_decay = 5e-4;
    cfg.fed.local.dropout = 0.5;
    cfg.fed.local.epochs = 5;
    cfg.fed.local.batch = 128;
    cfg.hidden = 64;
    cfg.unlearn = UnlearnConfig{};
    cfg.virt = VirtualConfig{};
    cfg.sweep.param = "unlearn.tau";
    cfg.sweep.values = {2, 5, 10, 20, 50};
    cfg.sweep.seeds = 3;
    return cfg;
}

ExperimentConfig parse_config_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, "malformed config JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) fail(ErrorCode::config, "config must be a JSON object");

    ExperimentConfig cfg = default_config();
    static const std::set<std::string> known{
        "format_version", "dataset", "partition", "seed", "target_client", "out_dir",
        "variant", "model", "federation", "unlearn", "virtual", "sweep", "workers"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            fail(ErrorCode::config, "unknown config key: " + it.key());

    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        if (!d.is_object()) fail(ErrorCode::config, "dataset: must be an object");
        if (d.contains("path")) cfg.dataset_path = d["path"].get<std::string>();
        if (d.contains("generate")) cfg.generate = d["generate"].get<std::string>();
        if (cfg.dataset_path.empty() && !cfg.generate)
            fail(ErrorCode::config, "dataset: needs path or generate");
    }
    if (j.contains("partition")) {
        const auto& p = j["partition"];
        if (p.contains("k")) cfg.partition.k = need_int_min(p["k"], "partition.k", 2);
        if (p.contains("seed") && !p["seed"].is_null())
            cfg.partition.seed = p["seed"].get<std::uint64_t>();
        if (p.contains("file") && !p["file"].is_null())
            cfg.partition.file = p["file"].get<std::string>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("target_client"))
        cfg.target_client = need_int_min(j["target_client"], "target_client", 0);
    if (cfg.target_client >= cfg.partition.k)
        fail(ErrorCode::config, "target_client: must be < partition.k");
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("variant")) {
        cfg.variant = j["variant"].get<std::string>();
        parse_variant(cfg.variant); // validates
    }
    if (j.contains("workers")) cfg.workers = need_int_min(j["workers"], "workers", 1);
    if (j.contains("model") && j["model"].contains("hidden"))
        cfg.hidden = need_int_min(j["model"]["hidden"], "model.hidden", 1);

    if (j.contains("federation")) {
        const auto& f = j["federation"];
        if (f.contains("rounds")) cfg.fed.rounds = need_int_min(f["rounds"], "federation.rounds", 0);
        if (f.contains("participation"))
            cfg.fed.participation =
                need_unit_interval(f["participation"], "federation.participation", true, false);
        if (f.contains("weight_rule")) {
            const std::string rule = f["weight_rule"].get<std::string>();
            if (rule == "by_node_count")
                cfg.fed.weight_rule = WeightRule::by_node_count;
            else if (rule == "uniform")
                cfg.fed.weight_rule = WeightRule::uniform;
            else
                fail(ErrorCode::config, "federation.weight_rule: unknown rule " + rule);
        }
        if (f.contains("local")) {
            const auto& l = f["local"];
            if (l.contains("lr")) cfg.fed.local.lr = need_positive(l["lr"], "federation.local.lr", 0);
            if (l.contains("weight_decay")) {
                cfg.fed.local.weight_decay = l["weight_decay"].get<double>();
                if (cfg.fed.local.weight_decay < 0)
                    fail(ErrorCode::config, "federation.local.weight_decay: must be >= 0");
            }
            if (l.contains("dropout"))
                cfg.fed.local.dropout =
                    need_unit_interval(l["dropout"], "federation.local.dropout", false, true);
            if (l.contains("epochs"))
                cfg.fed.local.epochs = need_int_min(l["epochs"], "federation.local.epochs", 1);
            if (l.contains("batch"))
                cfg.fed.local.batch = need_int_min(l["batch"], "federation.local.batch", 1);
        }
    }

    if (j.contains("unlearn")) {
        const auto& u = j["unlearn"];
        if (u.contains("epochs")) cfg.unlearn.epochs = need_int_min(u["epochs"], "unlearn.epochs", 0);
        if (u.contains("lr")) cfg.unlearn.lr = need_positive(u["lr"], "unlearn.lr", 0);
        if (u.contains("dropout"))
            cfg.unlearn.dropout = need_unit_interval(u["dropout"], "unlearn.dropout", false, true);
        if (u.contains("beta")) cfg.unlearn.npo_beta = need_positive(u["beta"], "unlearn.beta", 0);
        if (u.contains("scale")) {
            cfg.unlearn.scale = u["scale"].get<double>();
            if (cfg.unlearn.scale < 0) fail(ErrorCode::config, "unlearn.scale: must be >= 0");
        }
        if (u.contains("clip")) cfg.unlearn.clip = need_positive(u["clip"], "unlearn.clip", 0);
        if (u.contains("tau")) cfg.unlearn.drift_radius = need_positive(u["tau"], "unlearn.tau", 0);
        if (u.contains("margin")) {
            cfg.unlearn.margin = u["margin"].get<double>();
            if (cfg.unlearn.margin < 0) fail(ErrorCode::config, "unlearn.margin: must be >= 0");
        }
        if (u.contains("margin_weight")) {
            cfg.unlearn.margin_weight = u["margin_weight"].get<double>();
            if (cfg.unlearn.margin_weight < 0)
                fail(ErrorCode::config, "unlearn.margin_weight: must be >= 0");
        }
        if (u.contains("use_gru")) cfg.unlearn.use_gru = u["use_gru"].get<bool>();
    }

    if (j.contains("virtual")) {
        const auto& v = j["virtual"];
        if (v.contains("k") && !v["k"].is_null())
            cfg.virt.spectral_k = need_int_min(v["k"], "virtual.k", 1);
        if (v.contains("gamma"))
            cfg.virt.gamma = need_unit_interval(v["gamma"], "virtual.gamma", true, true);
        if (v.contains("bisect_gamma")) cfg.virt.bisect_gamma = v["bisect_gamma"].get<bool>();
        if (v.contains("sigma_x")) {
            cfg.virt.sigma_x = v["sigma_x"].get<double>();
            if (cfg.virt.sigma_x < 0) fail(ErrorCode::config, "virtual.sigma_x: must be >= 0");
        }
        if (v.contains("z_dim")) cfg.virt.z_dim = need_int_min(v["z_dim"], "virtual.z_dim", 1);
        if (v.contains("hidden")) cfg.virt.hidden = need_int_min(v["hidden"], "virtual.hidden", 1);
        if (v.contains("epochs"))
            cfg.virt.vgae_epochs = need_int_min(v["epochs"], "virtual.epochs", 0);
        if (v.contains("lr")) cfg.virt.vgae_lr = need_positive(v["lr"], "virtual.lr", 0);
        if (v.contains("repair_rounds"))
            cfg.virt.repair_rounds = need_int_min(v["repair_rounds"], "virtual.repair_rounds", 0);
    }

    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        if (s.contains("param")) cfg.sweep.param = s["param"].get<std::string>();
        if (s.contains("values")) {
            cfg.sweep.values.clear();
            for (const auto& v : s["values"]) cfg.sweep.values.push_back(v.get<double>());
        }
        if (s.contains("seeds")) cfg.sweep.seeds = need_int_min(s["seeds"], "sweep.seeds", 1);
    }

    cfg.fed.num_clients = cfg.partition.k;
    cfg.fed.seed = cfg.seed;
    cfg.fed.hidden = cfg.hidden;
    cfg.unlearn.seed = cfg.seed;
    cfg.virt.seed = cfg.seed;
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::config, "cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_json(text);
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["format_version"] = 1;
    j["dataset"]["path"] = cfg.dataset_path;
    if (cfg.generate) j["dataset"]["generate"] = *cfg.generate;
    j["partition"]["k"] = cfg.partition.k;
    if (cfg.partition.seed) j["partition"]["seed"] = *cfg.partition.seed;
    if (cfg.partition.file) j["partition"]["file"] = *cfg.partition.file;
    j["seed"] = cfg.seed;
    j["target_client"] = cfg.target_client;
    j["out_dir"] = cfg.out_dir;
    j["variant"] = cfg.variant;
    j["workers"] = cfg.workers;
    j["model"]["hidden"] = cfg.hidden;
    auto& f = j["federation"];
    f["rounds"] = cfg.fed.rounds;
    f["participation"] = cfg.fed.participation;
    f["weight_rule"] = cfg.fed.weight_rule == WeightRule::uniform ? "uniform" : "by_node_count";
    f["local"]["lr"] = cfg.fed.local.lr;
    f["local"]["weight_decay"] = cfg.fed.local.weight_decay;
    f["local"]["dropout"] = cfg.fed.local.dropout;
    f["local"]["epochs"] = cfg.fed.local.epochs;
    f["local"]["batch"] = cfg.fed.local.batch;
    auto& u = j["unlearn"];
    u["epochs"] = cfg.unlearn.epochs;
    u["lr"] = cfg.unlearn.lr;
    u["dropout"] = cfg.unlearn.dropout;
    u["beta"] = cfg.unlearn.npo_beta;
    u["scale"] = cfg.unlearn.scale;
    u["clip"] = cfg.unlearn.clip;
    u["tau"] = cfg.unlearn.drift_radius;
    u["margin"] = cfg.unlearn.margin;
    u["margin_weight"] = cfg.unlearn.margin_weight;
    u["use_gru"] = cfg.unlearn.use_gru;
    auto& v = j["virtual"];
    if (cfg.virt.spectral_k > 0) v["k"] = cfg.virt.spectral_k;
    v["gamma"] = cfg.virt.gamma;
    v["bisect_gamma"] = cfg.virt.bisect_gamma;
    v["sigma_x"] = cfg.virt.sigma_x;
    v["z_dim"] = cfg.virt.z_dim;
    v["hidden"] = cfg.virt.hidden;
    v["epochs"] = cfg.virt.vgae_epochs;
    v["lr"] = cfg.virt.vgae_lr;
    v["repair_rounds"] = cfg.virt.repair_rounds;
    auto& s = j["sweep"];
    s["param"] = cfg.sweep.param;
    s["values"] = cfg.sweep.values;
    s["seeds"] = cfg.sweep.seeds;
    return j.dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.out_dir.clear(); // moving the output directory must not invalidate checkpoints
    const std::string s = config_to_json(c);
    std::uint64_t h = 1469598103934665603ULL;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ULL;
    }
    return h;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, double value) {
    auto as_int = [&](const char* path) {
        const int v = static_cast<int>(value);
        if (v < 0 || v != value) fail(ErrorCode::config, std::string(path) + ": bad sweep value");
        return v;
    };
    const std::string k = key == "tau" ? "unlearn.tau" : key;
    if (k == "unlearn.tau") {
        if (value <= 0) fail(ErrorCode::config, "unlearn.tau: must be > 0");
        cfg.unlearn.drift_radius = value;
    } else if (k == "unlearn.beta") {
        if (value <= 0) fail(ErrorCode::config, "unlearn.beta: must be > 0");
        cfg.unlearn.npo_beta = value;
    } else if (k == "unlearn.scale") {
        cfg.unlearn.scale = value;
    } else if (k == "unlearn.clip") {
        if (value <= 0) fail(ErrorCode::config, "unlearn.clip: must be > 0");
        cfg.unlearn.clip = value;
    } else if (k == "unlearn.margin") {
        cfg.unlearn.margin = value;
    } else if (k == "unlearn.margin_weight") {
        cfg.unlearn.margin_weight = value;
    } else if (k == "unlearn.lr") {
        if (value <= 0) fail(ErrorCode::config, "unlearn.lr: must be > 0");
        cfg.unlearn.lr = value;
    } else if (k == "unlearn.epochs") {
        cfg.unlearn.epochs = as_int("unlearn.epochs");
    } else if (k == "virtual.gamma") {
        if (value <= 0 || value >= 1) fail(ErrorCode::config, "virtual.gamma: out of range");
        cfg.virt.gamma = value;
    } else if (k == "virtual.repair_rounds") {
        cfg.virt.repair_rounds = as_int("virtual.repair_rounds");
    } else if (k == "federation.rounds") {
        cfg.fed.rounds = as_int("federation.rounds");
    } else if (k == "federation.local.epochs") {
        cfg.fed.local.epochs = as_int("federation.local.epochs");
    } else {
        fail(ErrorCode::config, "unknown sweep parameter: " + key);
    }
}

Phase parse_phase(const std::string& name) {
    if (name == "train") return Phase::train;
    if (name == "unlearn") return Phase::unlearn;
    if (name == "repair") return Phase::repair;
    if (name == "retrain") return Phase::retrain;
    if (name == "ablation") return Phase::ablation;
    if (name == "sweep") return Phase::sweep;
    fail(ErrorCode::config, "unknown phase: " + name);
}

const char* phase_name(Phase p) {
    switch (p) {
        case Phase::train: return "train";
        case Phase::unlearn: return "unlearn";
        case Phase::repair: return "repair";
        case Phase::retrain: return "retrain";
        case Phase::ablation: return "ablation";
        case Phase::sweep: return "sweep";
    }
    return "?";
}

std::vector<Phase> parse_phases_csv(const std::string& csv) {
    std::vector<Phase> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(parse_phase(item));
    }
    if (out.empty()) fail(ErrorCode::config, "phase list is empty");
    return out;
}

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
    if (cfg.generate) return generate_benchmark(*cfg.generate);
    if (cfg.dataset_path.empty()) fail(ErrorCode::config, "dataset.path is required");
    return load_dataset(cfg.dataset_path);
}

const PhaseResult* ResultsReport::find(const std::string& name) const {
    for (const auto& p : phases)
        if (p.name == name) return &p;
    return nullptr;
}

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::vector<int> resolve_assignment(const ExperimentConfig& cfg, const Dataset& ds) {
    if (cfg.partition.file)
        return load_assignment(*cfg.partition.file, ds.n(), cfg.partition.k);
    const std::uint64_t pseed = cfg.partition.seed ? *cfg.partition.seed : cfg.seed;
    return partition_graph(ds.graph, cfg.partition.k, pseed);
}

struct CheckpointStore {
    fs::path dir;
    std::uint64_t hash = 0;

    fs::path params_path(const std::string& phase) const {
        return dir / (phase + "_params.bin");
    }
    fs::path meta_path() const { return dir / "state.json"; }

    bool has(const std::string& phase) const {
        if (!fs::exists(meta_path()) || !fs::exists(params_path(phase))) return false;
        std::ifstream in(meta_path());
        json j;
        try {
            in >> j;
        } catch (...) {
            return false;
        }
        if (!j.is_object() || !j.contains("completed")) return false;
        if (j.value("config_hash", std::string()) != std::to_string(hash)) return false;
        for (const auto& p : j["completed"])
            if (p.get<std::string>() == phase) return true;
        return false;
    }

    void mark(const std::string& phase, const ParamVector& params, const json& extra) {
        fs::create_directories(dir);
        save_params(params, params_path(phase).string());
        json j = json::object();
        if (fs::exists(meta_path())) {
            std::ifstream in(meta_path());
            try {
                in >> j;
            } catch (...) {
                j = json::object();
            }
        }
        if (!j.is_object() || j.value("config_hash", std::string()) != std::to_string(hash)) {
            j = json::object();
            j["completed"] = json::array();
        }
        j["config_hash"] = std::to_string(hash);
        if (!j.contains("completed")) j["completed"] = json::array();
        bool present = false;
        for (const auto& p : j["completed"]) present |= (p.get<std::string>() == phase);
        if (!present) j["completed"].push_back(phase);
        for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
        std::ofstream out(meta_path());
        out << j.dump(2) << "\n";
    }

    json meta() const {
        json j = json::object();
        if (fs::exists(meta_path())) {
            std::ifstream in(meta_path());
            try {
                in >> j;
            } catch (...) {
            }
        }
        return j;
    }
};

MiaThreshold threshold_from_json(const json& j) {
    MiaThreshold t;
    t.tau_pre = j.at("tau_pre").get<double>();
    t.member_loss_mean = j.value("member_loss_mean", 0.0);
    t.nonmember_loss_mean = j.value("nonmember_loss_mean", 0.0);
    t.balanced_accuracy = j.value("balanced_accuracy", 0.0);
    t.separability = j.value("separability", 0.5);
    t.degenerate = j.value("degenerate", false);
    return t;
}

json threshold_to_json(const MiaThreshold& t) {
    return json{{"tau_pre", t.tau_pre},
                {"member_loss_mean", t.member_loss_mean},
                {"nonmember_loss_mean", t.nonmember_loss_mean},
                {"balanced_accuracy", t.balanced_accuracy},
                {"separability", t.separability},
                {"degenerate", t.degenerate}};
}

} // namespace

ResultsReport run_pipeline(const ExperimentConfig& cfg, const std::vector<Phase>& phases) {
    ResultsReport report;
    report.config = cfg;

    std::set<Phase> requested(phases.begin(), phases.end());
    const Dataset ds = load_experiment_dataset(cfg);
    if (cfg.target_client >= cfg.partition.k)
        fail(ErrorCode::config, "target_client out of range");
    const auto assignment = resolve_assignment(cfg, ds);

    CheckpointStore store{fs::path(cfg.out_dir) / "checkpoints", config_hash(cfg)};

    PipelineInputs in;
    in.ds = &ds;
    in.assignment = assignment;
    in.fed = cfg.fed;
    in.unlearn = cfg.unlearn;
    in.virt = cfg.virt;
    in.target_client = cfg.target_client;

    // Shared state across phases, recomputed or loaded from checkpoints.
    std::optional<ServerState> trained;
    std::optional<MiaThreshold> threshold;
    std::optional<ParamVector> theta_u;
    std::optional<MiaSets> sets;

    auto shards_for = [&]() {
        return induce_shards(ds, assignment);
    };

    auto ensure_trained = [&](bool allow_run) {
        if (trained) return;
        if (store.has("train")) {
            ServerState st;
            st.shards = shards_for();
            st.weights = compute_weights(st.shards, cfg.fed.weight_rule);
            st.global = load_params(store.params_path("train").string());
            st.round = cfg.fed.rounds;
            trained = std::move(st);
            const json meta = store.meta();
            if (meta.contains("threshold")) threshold = threshold_from_json(meta["threshold"]);
            sets = build_mia_sets(trained->shards, cfg.target_client);
            return;
        }
        if (!allow_run)
            fail(ErrorCode::phase_dependency, "phase requires a completed train phase");

        Timer t;
        auto run = run_federated(ds, assignment, cfg.fed);
        trained = std::move(run.state);
        sets = build_mia_sets(trained->shards, cfg.target_client);
        threshold = fit_threshold(trained->global, trained->shards, *sets);

        PhaseResult pr;
        pr.name = "train";
        pr.scalars["accuracy"] = global_accuracy(trained->global, trained->shards, Split::test);
        pr.scalars["train_accuracy"] = global_accuracy(trained->global, trained->shards, Split::train);
        pr.scalars["val_accuracy"] = global_accuracy(trained->global, trained->shards, Split::val);
        pr.scalars["mia_rate_pre"] = mia_rate(trained->global, trained->shards, sets->members, *threshold);
        pr.scalars["tau_pre"] = threshold->tau_pre;
        pr.scalars["threshold_balanced_accuracy"] = threshold->balanced_accuracy;
        for (const auto& m : trained->history) {
            pr.curves["train_acc"].push_back(m.train_acc);
            pr.curves["val_acc"].push_back(m.val_acc);
            pr.curves["test_acc"].push_back(m.test_acc);
            pr.curves["global_norm"].push_back(m.global_norm);
        }
        pr.seconds = t.seconds();
        report.phases.push_back(std::move(pr));
        store.mark("train", trained->global, json{{"threshold", threshold_to_json(*threshold)}});
    };

    auto ensure_threshold = [&]() {
        if (threshold) return;
        const json meta = store.meta();
        if (meta.contains("threshold")) {
            threshold = threshold_from_json(meta["threshold"]);
            return;
        }
        fail(ErrorCode::phase_dependency, "missing fitted threshold; run the train phase first");
    };

    for (Phase phase : phases) {
        switch (phase) {
            case Phase::train: {
                ensure_trained(true);
                break;
            }
            case Phase::unlearn: {
                ensure_trained(requested.count(Phase::train) > 0);
                ensure_threshold();
                if (!sets) sets = build_mia_sets(trained->shards, cfg.target_client);
                Timer t;
                auto result = run_unlearning(*trained, cfg.target_client, *threshold,
                                             cfg.fed.local, cfg.unlearn);
                theta_u = result.theta_u;

                std::vector<ClientShard> retain;
                for (const auto& s : trained->shards)
                    if (s.client_id != cfg.target_client) retain.push_back(s);

                PhaseResult pr;
                pr.name = "unlearn";
                pr.scalars["accuracy"] = global_accuracy(*theta_u, retain, Split::test);
                pr.scalars["mia_rate_post"] =
                    mia_rate(*theta_u, trained->shards, sets->members, *threshold);
                pr.scalars["mia_rate_pre"] =
                    mia_rate(trained->global, trained->shards, sets->members, *threshold);
                pr.scalars["drift"] = (theta_u->v - trained->global.v).norm();
                for (const auto& e : result.log) {
                    pr.curves["target_ce"].push_back(e.target_ce);
                    pr.curves["npo"].push_back(e.npo);
                    pr.curves["margin"].push_back(e.margin);
                    pr.curves["drift"].push_back(e.drift);
                    pr.curves["mia_rate"].push_back(e.mia_rate);
                    pr.curves["dot_ur"].push_back(e.dot_ur);
                }
                pr.seconds = t.seconds();
                report.phases.push_back(std::move(pr));
                store.mark("unlearn", *theta_u, json::object());
                break;
            }
            case Phase::repair: {
                ensure_trained(requested.count(Phase::train) > 0);
                ensure_threshold();
                if (!sets) sets = build_mia_sets(trained->shards, cfg.target_client);
                if (!theta_u) {
                    if (store.has("unlearn"))
                        theta_u = load_params(store.params_path("unlearn").string());
                    else
                        fail(ErrorCode::phase_dependency, "repair requires a completed unlearn phase");
                }
                Timer t;
                const ClientShard* target = nullptr;
                std::vector<ClientShard> retain;
                for (const auto& s : trained->shards) {
                    if (s.client_id == cfg.target_client)
                        target = &s;
                    else
                        retain.push_back(s);
                }
                const ClientShard virt = build_virtual_client(*target, cfg.virt, trained->global);
                auto repaired = run_repair(retain, virt, *theta_u, cfg.fed, cfg.virt.repair_rounds);

                PhaseResult pr;
                pr.name = "repair";
                pr.scalars["accuracy"] = global_accuracy(repaired.global, retain, Split::test);
                pr.scalars["mia_rate_final"] =
                    mia_rate(repaired.global, trained->shards, sets->members, *threshold);
                pr.scalars["mia_rate_post"] =
                    mia_rate(*theta_u, trained->shards, sets->members, *threshold);
                for (const auto& m : repaired.history) {
                    pr.curves["test_acc"].push_back(m.test_acc);
                    pr.curves["global_norm"].push_back(m.global_norm);
                }
                pr.seconds = t.seconds();
                report.phases.push_back(std::move(pr));
                store.mark("repair", repaired.global, json::object());
                break;
            }
            case Phase::retrain: {
                Timer t;
                const ParamVector theta_r = retrain_oracle(ds, assignment, cfg.fed, cfg.target_client);
                PhaseResult pr;
                pr.name = "retrain";
                auto shards = shards_for();
                std::vector<ClientShard> retain;
                for (const auto& s : shards)
                    if (s.client_id != cfg.target_client) retain.push_back(s);
                pr.scalars["accuracy"] = global_accuracy(theta_r, retain, Split::test);
                if (!sets) sets = build_mia_sets(shards, cfg.target_client);
                const json meta = store.meta();
                if (threshold || meta.contains("threshold")) {
                    if (!threshold) threshold = threshold_from_json(meta["threshold"]);
                    pr.scalars["mia_rate"] = mia_rate(theta_r, shards, sets->members, *threshold);
                }
                pr.seconds = t.seconds();
                report.phases.push_back(std::move(pr));
                store.mark("retrain", theta_r, json::object());
                break;
            }
            case Phase::ablation: {
                ensure_trained(requested.count(Phase::train) > 0);
                for (const char* name : {"full", "no_gru", "no_virtual"}) {
                    Timer t;
                    const auto metrics =
                        run_variant_pipeline(in, parse_variant(name), &*trained);
                    PhaseResult pr;
                    pr.name = std::string("ablation_") + name;
                    pr.scalars["accuracy"] = metrics.accuracy;
                    pr.scalars["mia_rate_final"] = metrics.mia_rate_final;
                    pr.scalars["mia_rate_post"] = metrics.mia_rate_post;
                    pr.scalars["mia_rate_pre"] = metrics.mia_rate_pre;
                    pr.scalars["accuracy_pre"] = metrics.accuracy_pre;
                    pr.scalars["accuracy_unlearned"] = metrics.accuracy_unlearned;
                    pr.seconds = t.seconds();
                    report.phases.push_back(std::move(pr));
                }
                break;
            }
            case Phase::sweep: {
                auto sweep_report = run_sweep(cfg, cfg.sweep.param, cfg.sweep.values);
                report.sweep_points = sweep_report.sweep_points;
                for (auto& pr : sweep_report.phases) report.phases.push_back(std::move(pr));
                break;
            }
        }
    }
    return report;
}

ResultsReport run_sweep(const ExperimentConfig& cfg, const std::string& param,
                        const std::vector<double>& values) {
    if (values.empty()) fail(ErrorCode::config, "sweep needs at least one value");
    ResultsReport report;
    report.config = cfg;

    const Dataset ds = load_experiment_dataset(cfg);

    int workers = cfg.workers;
    if (const char* env = std::getenv("FEDGCV_THREADS")) {
        const int w = std::atoi(env);
        if (w >= 1) workers = w;
    }

    struct SeedContext {
        std::uint64_t seed;
        std::vector<int> assignment;
        ServerState trained;
        MiaThreshold threshold;
        MiaSets sets;
    };

    // Train once per seed; every sweep value reuses the same trained model.
    std::vector<SeedContext> contexts;
    for (int si = 0; si < cfg.sweep.seeds; ++si) {
        SeedContext ctx;
        ctx.seed = cfg.seed + static_cast<std::uint64_t>(si);
        ExperimentConfig c = cfg;
        c.seed = ctx.seed;
        c.fed.seed = ctx.seed;
        c.unlearn.seed = ctx.seed;
        c.virt.seed = ctx.seed;
        ctx.assignment = resolve_assignment(c, ds);
        auto run = run_federated(ds, ctx.assignment, c.fed);
        ctx.trained = std::move(run.state);
        ctx.sets = build_mia_sets(ctx.trained.shards, cfg.target_client);
        ctx.threshold = fit_threshold(ctx.trained.global, ctx.trained.shards, ctx.sets);
        contexts.push_back(std::move(ctx));
    }

    struct Job {
        double value;
        int seed_index;
    };
    std::vector<Job> jobs;
    for (double v : values)
        for (int si = 0; si < cfg.sweep.seeds; ++si) jobs.push_back({v, si});

    std::vector<SweepPointResult> results(jobs.size());
    auto run_job = [&](std::size_t ji) {
        const Job& job = jobs[ji];
        const SeedContext& ctx = contexts[job.seed_index];
        ExperimentConfig c = cfg;
        c.seed = ctx.seed;
        c.fed.seed = ctx.seed;
        c.unlearn.seed = ctx.seed;
        c.virt.seed = ctx.seed;
        set_config_value(c, param, job.value);

        auto unlearned = run_unlearning(ctx.trained, cfg.target_client, ctx.threshold,
                                        c.fed.local, c.unlearn);
        const ClientShard* target = nullptr;
        std::vector<ClientShard> retain;
        for (const auto& s : ctx.trained.shards) {
            if (s.client_id == cfg.target_client)
                target = &s;
            else
                retain.push_back(s);
        }
        const ClientShard virt = build_virtual_client(*target, c.virt, ctx.trained.global);
        auto repaired = run_repair(retain, virt, unlearned.theta_u, c.fed, c.virt.repair_rounds);

        SweepPointResult r;
        r.value = job.value;
        r.seed = ctx.seed;
        r.accuracy = global_accuracy(repaired.global, retain, Split::test);
        r.mia_rate = mia_rate(repaired.global, ctx.trained.shards, ctx.sets.members, ctx.threshold);
        results[ji] = r;
    };

    if (workers <= 1) {
        for (std::size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                while (true) {
                    const std::size_t ji = next.fetch_add(1);
                    if (ji >= jobs.size()) return;
                    run_job(ji);
                }
            });
        for (auto& th : pool) th.join();
    }

    report.sweep_points = results;

    // Per-value mean/std summaries.
    for (double v : values) {
        PhaseResult pr;
        std::ostringstream name;
        name << "sweep_" << param << "_" << v;
        pr.name = name.str();
        double acc_sum = 0, mia_sum = 0;
        int count = 0;
        for (const auto& r : results)
            if (r.value == v) {
                acc_sum += r.accuracy;
                mia_sum += r.mia_rate;
                ++count;
            }
        const double acc_mean = acc_sum / count, mia_mean = mia_sum / count;
        double acc_var = 0, mia_var = 0;
        for (const auto& r : results)
            if (r.value == v) {
                acc_var += (r.accuracy - acc_mean) * (r.accuracy - acc_mean);
                mia_var += (r.mia_rate - mia_mean) * (r.mia_rate - mia_mean);
            }
        pr.scalars["value"] = v;
        pr.scalars["accuracy_mean"] = acc_mean;
        pr.scalars["accuracy_std"] = std::sqrt(acc_var / count);
        pr.scalars["mia_rate_mean"] = mia_mean;
        pr.scalars["mia_rate_std"] = std::sqrt(mia_var / count);
        report.phases.push_back(std::move(pr));
    }
    return report;
}

ResultsReport run_ablation_pipeline(const ExperimentConfig& cfg, const std::string& variant) {
    ResultsReport report;
    report.config = cfg;
    report.config.variant = variant;

    const Dataset ds = load_experiment_dataset(cfg);
    const auto assignment = resolve_assignment(cfg, ds);
    Timer t;
    const auto metrics = run_ablation(ds, assignment, cfg.fed, cfg.unlearn, cfg.virt,
                                      cfg.target_client, parse_variant(variant));
    PhaseResult pr;
    pr.name = std::string("ablation_") + variant;
    pr.scalars["accuracy"] = metrics.accuracy;
    pr.scalars["mia_rate_final"] = metrics.mia_rate_final;
    pr.scalars["mia_rate_post"] = metrics.mia_rate_post;
    pr.scalars["mia_rate_pre"] = metrics.mia_rate_pre;
    pr.scalars["accuracy_pre"] = metrics.accuracy_pre;
    pr.scalars["accuracy_unlearned"] = metrics.accuracy_unlearned;
    for (const auto& e : metrics.unlearn_curve) {
        pr.curves["target_ce"].push_back(e.target_ce);
        pr.curves["mia_rate"].push_back(e.mia_rate);
        pr.curves["drift"].push_back(e.drift);
    }
    pr.seconds = t.seconds();
    report.phases.push_back(std::move(pr));
    return report;
}

std::string report_to_json(const ResultsReport& report) {
    json j;
    j["format_version"] = 1;
    j["config"] = json::parse(config_to_json(report.config));
    j["phases"] = json::object();
    for (const auto& p : report.phases) {
        json pj;
        for (const auto& [k, v] : p.scalars) pj["metrics"][k] = v;
        for (const auto& [k, v] : p.curves) pj["curves"][k] = v;
        j["phases"][p.name] = pj;
    }
    if (!report.sweep_points.empty()) {
        json arr = json::array();
        for (const auto& r : report.sweep_points)
            arr.push_back(json{{"value", r.value},
                               {"seed", r.seed},
                               {"accuracy", r.accuracy},
                               {"mia_rate", r.mia_rate}});
        j["sweep_points"] = arr;
    }
    return j.dump(2) + "\n";
}

void emit_results(const ResultsReport& report, const std::string& dir) {
    fs::create_directories(dir);

    {
        std::ofstream out(fs::path(dir) / "report.json");
        if (!out) fail(ErrorCode::io, "cannot write report.json");
        out << report_to_json(report);
    }
    {
        std::ofstream out(fs::path(dir) / "metrics.csv");
        if (!out) fail(ErrorCode::io, "cannot write metrics.csv");
        out << "phase,metric,value\n";
        out.precision(17);
        for (const auto& p : report.phases)
            for (const auto& [k, v] : p.scalars) out << p.name << "," << k << "," << v << "\n";
        for (const auto& r : report.sweep_points)
            out << "sweep_point,value=" << r.value << ";seed=" << r.seed << ",accuracy=" << r.accuracy
                << ";mia_rate=" << r.mia_rate << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "curves.csv");
        if (!out) fail(ErrorCode::io, "cannot write curves.csv");
        out << "phase,series,step,value\n";
        out.precision(17);
        for (const auto& p : report.phases)
            for (const auto& [series, values] : p.curves)
                for (std::size_t i = 0; i < values.size(); ++i)
                    out << p.name << "," << series << "," << i << "," << values[i] << "\n";
    }
    {
        // Wall-clock sidecar; deliberately outside report.json so the report
        // stays byte-identical across reruns of the same config + seed.
        json info;
        for (const auto& p : report.phases) info["phase_seconds"][p.name] = p.seconds;
        std::ofstream out(fs::path(dir) / "run_info.json");
        out << info.dump(2) << "\n";
    }
}

} // namespace fedgcv
