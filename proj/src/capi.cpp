#include "fedgcv.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "fedgcv/datagen.hpp"
#include "fedgcv/errors.hpp"
#include "fedgcv/pipeline.hpp"

using namespace fedgcv;

struct fgv_dataset_s {
    Dataset ds;
};
struct fgv_config_s {
    ExperimentConfig cfg;
};
struct fgv_report_s {
    ResultsReport report;
};

namespace {

thread_local std::string g_last_error = "ok";

fgv_status status_of(const Error& e) {
    switch (e.code()) {
        case ErrorCode::parse: return FGV_ERR_PARSE;
        case ErrorCode::config:
        case ErrorCode::phase_dependency: return FGV_ERR_CONFIG;
        case ErrorCode::io: return FGV_ERR_IO;
        case ErrorCode::validation:
        case ErrorCode::degree_zero:
        case ErrorCode::shape:
        case ErrorCode::empty_mask:
        case ErrorCode::empty_split:
        case ErrorCode::partition: return FGV_ERR_VALIDATION;
        default: return FGV_ERR_RUNTIME;
    }
}

template <typename F>
fgv_status guarded(F&& fn) {
    try {
        fn();
        g_last_error = "ok";
        return FGV_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return FGV_ERR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown failure";
        return FGV_ERR_RUNTIME;
    }
}

fgv_status invalid(const char* msg) {
    g_last_error = msg;
    return FGV_ERR_INVALID;
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

} // namespace

extern "C" {

const char* fgv_version(void) { return "1.0.0"; }

const char* fgv_last_error(void) { return g_last_error.c_str(); }

fgv_status fgv_dataset_load(const char* path, fgv_dataset** out) {
    if (!path || !out) return invalid("fgv_dataset_load: null argument");
    return guarded([&] { *out = new fgv_dataset_s{load_dataset(path)}; });
}

fgv_status fgv_dataset_generate(const char* name, uint64_t seed, fgv_dataset** out) {
    if (!name || !out) return invalid("fgv_dataset_generate: null argument");
    return guarded([&] { *out = new fgv_dataset_s{generate_benchmark(name, seed)}; });
}

fgv_status fgv_dataset_save(const fgv_dataset* ds, const char* path) {
    if (!ds || !path) return invalid("fgv_dataset_save: null argument");
    return guarded([&] { save_dataset(ds->ds, path); });
}

int64_t fgv_dataset_nodes(const fgv_dataset* ds) { return ds ? ds->ds.n() : -1; }
int64_t fgv_dataset_features(const fgv_dataset* ds) { return ds ? ds->ds.d() : -1; }
int64_t fgv_dataset_classes(const fgv_dataset* ds) { return ds ? ds->ds.num_classes : -1; }
int64_t fgv_dataset_edges(const fgv_dataset* ds) { return ds ? ds->ds.graph.edge_count() : -1; }

void fgv_dataset_free(fgv_dataset* ds) { delete ds; }

fgv_status fgv_config_load(const char* path, fgv_config** out) {
    if (!path || !out) return invalid("fgv_config_load: null argument");
    return guarded([&] { *out = new fgv_config_s{parse_config(path)}; });
}

fgv_status fgv_config_parse(const char* json_text, fgv_config** out) {
    if (!json_text || !out) return invalid("fgv_config_parse: null argument");
    return guarded([&] { *out = new fgv_config_s{parse_config_json(json_text)}; });
}

fgv_status fgv_config_set_seed(fgv_config* cfg, uint64_t seed) {
    if (!cfg) return invalid("fgv_config_set_seed: null config");
    cfg->cfg.seed = seed;
    cfg->cfg.fed.seed = seed;
    cfg->cfg.unlearn.seed = seed;
    cfg->cfg.virt.seed = seed;
    g_last_error = "ok";
    return FGV_OK;
}

fgv_status fgv_config_set_out_dir(fgv_config* cfg, const char* dir) {
    if (!cfg || !dir) return invalid("fgv_config_set_out_dir: null argument");
    cfg->cfg.out_dir = dir;
    g_last_error = "ok";
    return FGV_OK;
}

char* fgv_config_to_json(const fgv_config* cfg) {
    if (!cfg) return nullptr;
    return dup_string(config_to_json(cfg->cfg));
}

void fgv_config_free(fgv_config* cfg) { delete cfg; }

fgv_status fgv_run(const fgv_config* cfg, const char* phases_csv, fgv_report** out) {
    if (!cfg || !phases_csv || !out) return invalid("fgv_run: null argument");
    return guarded([&] {
        const auto phases = parse_phases_csv(phases_csv);
        *out = new fgv_report_s{run_pipeline(cfg->cfg, phases)};
    });
}

fgv_status fgv_sweep(const fgv_config* cfg, const char* param, const double* values,
                     size_t count, fgv_report** out) {
    if (!cfg || !param || !values || !out || count == 0)
        return invalid("fgv_sweep: null or empty argument");
    return guarded([&] {
        std::vector<double> vals(values, values + count);
        *out = new fgv_report_s{run_sweep(cfg->cfg, param, vals)};
    });
}

fgv_status fgv_ablate(const fgv_config* cfg, const char* variant, fgv_report** out) {
    if (!cfg || !variant || !out) return invalid("fgv_ablate: null argument");
    return guarded([&] { *out = new fgv_report_s{run_ablation_pipeline(cfg->cfg, variant)}; });
}

char* fgv_report_to_json(const fgv_report* report) {
    if (!report) return nullptr;
    return dup_string(report_to_json(report->report));
}

fgv_status fgv_report_emit(const fgv_report* report, const char* out_dir) {
    if (!report || !out_dir) return invalid("fgv_report_emit: null argument");
    return guarded([&] { emit_results(report->report, out_dir); });
}

void fgv_report_free(fgv_report* report) { delete report; }

void fgv_string_free(char* s) { std::free(s); }

} // extern "C"
