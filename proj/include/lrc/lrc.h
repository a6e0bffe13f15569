/*
 * lrc: low-rank CNN compression, C interface.
 *
 * All objects are opaque handles created and released by the library.
 * Every fallible call returns an lrc_status; on failure a description of
 * the error is available from lrc_last_error() on the same thread.
 * Strings returned through char** are owned by the caller and must be
 * released with lrc_string_free().
 */
#ifndef LRC_LRC_H
#define LRC_LRC_H

#include <stddef.h>
#include <stdint.h>

#if defined(LRC_BUILDING_LIBRARY)
#define LRC_API __attribute__((visibility("default")))
#else
#define LRC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lrc_status {
  LRC_OK = 0,
  LRC_ERR_INVALID_ARGUMENT = 1,
  LRC_ERR_IO = 2,
  LRC_ERR_FORMAT = 3,
  LRC_ERR_CHECKSUM = 4,
  LRC_ERR_TRUNCATED = 5,
  LRC_ERR_UNKNOWN_KIND = 6,
  LRC_ERR_VERSION = 7,
  LRC_ERR_NUMERIC = 8,
  LRC_ERR_INTERNAL = 9
} lrc_status;

typedef struct lrc_model lrc_model;
typedef struct lrc_dataset lrc_dataset;
typedef struct lrc_report lrc_report;

typedef enum lrc_r4_rule { LRC_R4_CHANNEL_RATIO = 0, LRC_R4_VBMF_INDEPENDENT = 1 } lrc_r4_rule;

typedef struct lrc_rank_policy {
  lrc_r4_rule r4_rule;
  size_t min_rank;
  double rank_cap_fraction;
} lrc_rank_policy;

#define LRC_MAX_LR_STEPS 16

typedef struct lrc_train_options {
  size_t epochs_overparam;
  size_t epochs_lowrank;
  size_t batch_size;
  size_t lr_steps; /* entries used in lr_epochs / lr_rates */
  size_t lr_epochs[LRC_MAX_LR_STEPS];
  double lr_rates[LRC_MAX_LR_STEPS];
  size_t lowrank_lr_steps; /* phase-2 schedule, epochs counted from its start */
  size_t lowrank_lr_epochs[LRC_MAX_LR_STEPS];
  double lowrank_lr_rates[LRC_MAX_LR_STEPS];
  double rho;
  double lambda;
  uint64_t seed;
  int keep_ortho_phase2;
} lrc_train_options;

typedef struct lrc_synth_options {
  size_t count;
  size_t classes;
  size_t channels;
  size_t height;
  size_t width;
  double margin;
  double noise;
  uint64_t seed;
} lrc_synth_options;

typedef struct lrc_compress_options {
  int auto_ranks;  /* nonzero: choose ranks with VBMF under `policy` */
  size_t r3;       /* fixed conv ranks, clamped per layer; 0 keeps full rank */
  size_t r4;
  size_t fc_rank;  /* fixed FC rank, clamped per layer; 0 keeps full rank */
  lrc_rank_policy policy;
  const lrc_dataset* data; /* optional: retrain for train.epochs_lowrank and measure Top-1 */
  lrc_train_options train;
} lrc_compress_options;

LRC_API const char* lrc_version(void);
LRC_API const char* lrc_last_error(void);
LRC_API const char* lrc_status_name(lrc_status status);
LRC_API void lrc_string_free(char* s);

LRC_API void lrc_rank_policy_default(lrc_rank_policy* policy);
/* Full-scale schedule: 200 + 60 epochs, batch 128, lr 0.1 -> 0.01 (100) -> 0.001 (150);
 * retraining at lr 0.01. */
LRC_API void lrc_train_options_default(lrc_train_options* options);
/* Desk scale: 30 + 30 epochs at batch size 4, otherwise as above. */
LRC_API void lrc_train_options_desk(lrc_train_options* options);
/* Overlay a key/value train config file onto *options. */
LRC_API lrc_status lrc_train_options_load(const char* path, lrc_train_options* options);
LRC_API void lrc_synth_options_default(lrc_synth_options* options);
LRC_API void lrc_compress_options_default(lrc_compress_options* options);

/* Models. `arch` is an architecture config path or the name "tinynet". */
LRC_API lrc_status lrc_model_init(const char* arch, uint64_t seed, lrc_model** out);
LRC_API lrc_status lrc_model_load(const char* dir, lrc_model** out);
LRC_API lrc_status lrc_model_save(const lrc_model* model, const char* dir);
LRC_API lrc_status lrc_model_describe(const lrc_model* model, char** text);
LRC_API size_t lrc_model_layer_count(const lrc_model* model);
LRC_API size_t lrc_model_parameter_count(const lrc_model* model);
/* Mean ||U^T U - I||_F over the u3/u4 factors of factorized conv layers. */
LRC_API double lrc_model_ortho_residual(const lrc_model* model);
LRC_API size_t lrc_model_classes(const lrc_model* model);
/* Input image shape; any pointer may be NULL. */
LRC_API void lrc_model_input(const lrc_model* model, size_t* channels, size_t* height, size_t* width);
LRC_API void lrc_model_free(lrc_model* model);

/* Datasets. `path` is a batch file or a CIFAR-10 directory (training split). */
LRC_API lrc_status lrc_dataset_load_cifar(const char* path, int cifar100, lrc_dataset** out);
LRC_API lrc_status lrc_dataset_synth(const lrc_synth_options* options, lrc_dataset** out);
LRC_API size_t lrc_dataset_size(const lrc_dataset* data);
LRC_API size_t lrc_dataset_label(const lrc_dataset* data, size_t index);
LRC_API void lrc_dataset_free(lrc_dataset* data);

LRC_API lrc_status lrc_evaluate(const lrc_model* model, const lrc_dataset* data, double* top1);

/* Per-layer VBMF rank reports, rendered as text. */
LRC_API lrc_status lrc_ranks(const lrc_model* model, const lrc_rank_policy* policy, char** text);

LRC_API lrc_status lrc_compress(const lrc_model* model, const lrc_compress_options* options, lrc_model** out,
                                lrc_report** report);

/* Over-parameterized training with orthogonal regularization. The per-epoch
 * loss history is copied into `history` (up to `capacity` entries) and its
 * full length stored in *history_len; either may be NULL. */
LRC_API lrc_status lrc_train(const lrc_model* model, const lrc_dataset* data, const lrc_train_options* options,
                             lrc_model** out, double* history, size_t capacity, size_t* history_len);

/* init -> train -> VBMF ranks -> truncate -> retrain -> report. */
LRC_API lrc_status lrc_pipeline(const char* arch, const lrc_dataset* data, const lrc_train_options* options,
                                const lrc_rank_policy* policy, lrc_model** out, lrc_report** report);

LRC_API lrc_status lrc_report_save(const lrc_report* report, const char* dir);
LRC_API lrc_status lrc_report_load(const char* dir, lrc_report** out);
LRC_API lrc_status lrc_report_render(const lrc_report* report, int printed_formulas, char** text);
LRC_API lrc_status lrc_report_json(const lrc_report* report, char** json);
LRC_API double lrc_report_model_cr(const lrc_report* report);
LRC_API double lrc_report_top1_before(const lrc_report* report);
LRC_API double lrc_report_top1_after(const lrc_report* report);
LRC_API void lrc_report_free(lrc_report* report);

#ifdef __cplusplus
}
#endif

#endif /* LRC_LRC_H */
