/* C interface to the heg library. All functions return a heg_status; on
 * failure heg_last_error() describes the cause (thread-local, valid until
 * the next call on the same thread). Handles are opaque and owned by the
 * caller, released with the matching *_destroy function (NULL is allowed).
 *
 * String outputs follow one convention: the text is copied into buf when
 * capacity allows (NUL-terminated), and *needed always receives the size
 * required including the terminator. Pass buf = NULL to query the size. */
#ifndef HEG_H
#define HEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(HEG_BUILDING_LIBRARY)
#define HEG_API __attribute__((visibility("default")))
#else
#define HEG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum heg_status {
  HEG_OK = 0,
  HEG_ERR_USAGE = 1,    /* bad argument or configuration value */
  HEG_ERR_DATA = 2,     /* unreadable, malformed or inconsistent input */
  HEG_ERR_NUMERIC = 3,  /* non-finite loss or gradient */
  HEG_ERR_INTERNAL = 4
} heg_status;

typedef struct heg_config heg_config;
typedef struct heg_dataset heg_dataset;
typedef struct heg_model heg_model;
typedef struct heg_report heg_report;
typedef struct heg_ablation heg_ablation;

HEG_API const char* heg_version(void);
HEG_API const char* heg_last_error(void);
HEG_API const char* heg_status_name(heg_status status);

/* Training configuration. Keys match the JSON config file. */
HEG_API heg_status heg_config_create(heg_config** out);
HEG_API void heg_config_destroy(heg_config* config);
/* Merges a JSON config file over the current values; unknown keys fail. */
HEG_API heg_status heg_config_load(heg_config* config, const char* path);
HEG_API heg_status heg_config_set(heg_config* config, const char* key, const char* value);
HEG_API heg_status heg_config_json(const heg_config* config, char* buf, size_t cap, size_t* needed);
HEG_API heg_status heg_config_save(const heg_config* config, const char* path);

typedef struct heg_synth_options {
  const char* task; /* "skew_coded", "variance_coded" or "mean_coded" */
  size_t num_videos;
  size_t frames_per_video;
  size_t min_objects;
  size_t max_objects;
  size_t feature_dim;
  uint64_t seed;
  double train_fraction;
  double val_fraction; /* the rest goes to test */
} heg_synth_options;

HEG_API void heg_synth_options_default(heg_synth_options* options);
/* Writes a dataset directory: annotations.jsonl, features/, splits.json. */
HEG_API heg_status heg_synth_generate(const heg_synth_options* options, const char* out_dir);

/* Loads a dataset directory and builds one graph per video. A nonzero
 * expected_feature_dim rejects feature files of any other width. */
HEG_API heg_status heg_dataset_open(const char* dir, size_t stride, size_t expected_feature_dim,
                                    heg_dataset** out);
HEG_API void heg_dataset_destroy(heg_dataset* dataset);
HEG_API heg_status heg_dataset_split_size(const heg_dataset* dataset, const char* split, size_t* out);
HEG_API heg_status heg_dataset_feature_dim(const heg_dataset* dataset, size_t* out);
HEG_API heg_status heg_dataset_num_classes(const heg_dataset* dataset, size_t* out);

/* Writes graphs/<video_id>.hegg for every video plus graphs.jsonl (one
 * summary record per graph) and tubes.jsonl (one tube window per node). */
HEG_API heg_status heg_build_graphs(const char* dataset_dir, const heg_config* config, const char* out_dir,
                                    size_t* graphs_written);

typedef void (*heg_epoch_fn)(size_t epoch, double mean_loss, void* user);

/* Trains on config.train_split. on_epoch may be NULL. */
HEG_API heg_status heg_train(const heg_config* config, const heg_dataset* dataset, heg_epoch_fn on_epoch,
                             void* user, heg_model** out);
HEG_API void heg_model_destroy(heg_model* model);
HEG_API heg_status heg_model_save(const heg_model* model, const char* path);
HEG_API heg_status heg_model_load(const char* path, heg_model** out);
HEG_API heg_status heg_model_dims(const heg_model* model, size_t* input_dim, size_t* hidden_dim,
                                  size_t* output_dim);
/* Per-epoch mean loss of the run that produced the model; zero epochs for
 * a loaded checkpoint. */
HEG_API heg_status heg_model_epoch_count(const heg_model* model, size_t* out);
HEG_API heg_status heg_model_epoch_loss(const heg_model* model, size_t epoch, double* out);
HEG_API heg_status heg_model_parameter_count(const heg_model* model, size_t* out);

HEG_API heg_status heg_evaluate(const heg_model* model, const heg_dataset* dataset, const char* split,
                                unsigned threads, heg_report** out);
HEG_API void heg_report_destroy(heg_report* report);
/* Percentages. */
HEG_API heg_status heg_report_metrics(const heg_report* report, double* accuracy, double* map);
HEG_API heg_status heg_report_text(const heg_report* report, char* buf, size_t cap, size_t* needed);
HEG_API heg_status heg_report_json(const heg_report* report, char* buf, size_t cap, size_t* needed);

typedef void (*heg_cell_fn)(size_t index, const char* name, int ok, double accuracy, double map, void* user);

/* Grids: "table3", "pooling", "compression", or an aggregator list for a
 * single cell. A failing cell is recorded and the grid continues. */
HEG_API heg_status heg_ablate(const heg_config* config, const heg_dataset* dataset, const char* grid,
                              heg_cell_fn on_cell, void* user, heg_ablation** out);
HEG_API void heg_ablation_destroy(heg_ablation* ablation);
HEG_API heg_status heg_ablation_cell_count(const heg_ablation* ablation, size_t* out);
HEG_API heg_status heg_ablation_non_decreasing_pairs(const heg_ablation* ablation, size_t* out);
HEG_API heg_status heg_ablation_table(const heg_ablation* ablation, char* buf, size_t cap, size_t* needed);
HEG_API heg_status heg_ablation_jsonl(const heg_ablation* ablation, char* buf, size_t cap, size_t* needed);

typedef struct heg_gradcheck_entry {
  char component[32];
  double max_relative_error;
  size_t entries;
} heg_gradcheck_entry;

/* Fills up to cap entries; *count receives the total available. */
HEG_API heg_status heg_gradcheck(uint64_t seed, heg_gradcheck_entry* entries, size_t cap, size_t* count);

#ifdef __cplusplus
}
#endif

#endif /* HEG_H */
