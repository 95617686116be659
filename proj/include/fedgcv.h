/*
 * fedgcv C API: graph federated learning with client withdrawal, spectral
 * virtual-client synthesis, and membership-inference evaluation.
 *
 * All objects are opaque handles created and destroyed through this header.
 * Functions return FGV_OK on success; on failure they return an error code
 * and leave a human-readable message in fgv_last_error() (thread-local).
 */
#ifndef FEDGCV_H
#define FEDGCV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FGV_API __declspec(dllexport)
#else
#define FGV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fgv_status {
    FGV_OK = 0,
    FGV_ERR_INVALID = 1,    /* bad argument / null handle */
    FGV_ERR_PARSE = 2,      /* malformed input file */
    FGV_ERR_VALIDATION = 3, /* well-formed but inconsistent data */
    FGV_ERR_CONFIG = 4,     /* configuration rejected */
    FGV_ERR_IO = 5,
    FGV_ERR_RUNTIME = 6
} fgv_status;

typedef struct fgv_dataset_s fgv_dataset;
typedef struct fgv_config_s fgv_config;
typedef struct fgv_report_s fgv_report;

FGV_API const char* fgv_version(void);

/* Message for the most recent failure on this thread; never NULL. */
FGV_API const char* fgv_last_error(void);

/* ---- datasets -------------------------------------------------------- */

FGV_API fgv_status fgv_dataset_load(const char* path, fgv_dataset** out);

/* Deterministic synthetic benchmark ("cora", "citeseer", "pubmed",
 * "tolokers", "toy"); seed 0 selects the canonical seed for the name. */
FGV_API fgv_status fgv_dataset_generate(const char* name, uint64_t seed, fgv_dataset** out);

FGV_API fgv_status fgv_dataset_save(const fgv_dataset* ds, const char* path);
FGV_API int64_t fgv_dataset_nodes(const fgv_dataset* ds);
FGV_API int64_t fgv_dataset_features(const fgv_dataset* ds);
FGV_API int64_t fgv_dataset_classes(const fgv_dataset* ds);
FGV_API int64_t fgv_dataset_edges(const fgv_dataset* ds);
FGV_API void fgv_dataset_free(fgv_dataset* ds);

/* ---- configuration --------------------------------------------------- */

FGV_API fgv_status fgv_config_load(const char* path, fgv_config** out);
FGV_API fgv_status fgv_config_parse(const char* json_text, fgv_config** out);
FGV_API fgv_status fgv_config_set_seed(fgv_config* cfg, uint64_t seed);
FGV_API fgv_status fgv_config_set_out_dir(fgv_config* cfg, const char* dir);

/* Serialized config with every default filled in; free with fgv_string_free. */
FGV_API char* fgv_config_to_json(const fgv_config* cfg);
FGV_API void fgv_config_free(fgv_config* cfg);

/* ---- pipelines -------------------------------------------------------- */

/* phases_csv: comma-separated subset of
 * train,unlearn,repair,retrain,ablation,sweep (executed in the given order,
 * with checkpoint-based resume under <out_dir>/checkpoints). */
FGV_API fgv_status fgv_run(const fgv_config* cfg, const char* phases_csv, fgv_report** out);

FGV_API fgv_status fgv_sweep(const fgv_config* cfg, const char* param, const double* values,
                             size_t count, fgv_report** out);

/* variant: "full", "no_gru" or "no_virtual". */
FGV_API fgv_status fgv_ablate(const fgv_config* cfg, const char* variant, fgv_report** out);

/* ---- reports ----------------------------------------------------------- */

FGV_API char* fgv_report_to_json(const fgv_report* report);
FGV_API fgv_status fgv_report_emit(const fgv_report* report, const char* out_dir);
FGV_API void fgv_report_free(fgv_report* report);

FGV_API void fgv_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* FEDGCV_H */
