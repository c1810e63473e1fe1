#ifndef IDMINER_H
#define IDMINER_H

/* C interface of the identity-mining deepfake detection laboratory.
 *
 * Every function returns an idm_status; on failure idm_last_error() holds a
 * thread-local description of what went wrong. Paths are UTF-8, NUL
 * terminated. Commands write their outputs (manifests, checkpoints, score
 * tables, metric reports) to the given locations and drop a run manifest
 * recording their exact inputs next to them.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define IDM_API __declspec(dllexport)
#else
#define IDM_API __attribute__((visibility("default")))
#endif

typedef enum idm_status {
    IDM_OK = 0,
    IDM_ERR_SHAPE = 1,      /* dimension mismatch between arrays */
    IDM_ERR_DOMAIN = 2,     /* value outside the mathematical domain */
    IDM_ERR_FORMAT = 3,     /* malformed external data */
    IDM_ERR_CONFIG = 4,     /* invalid or missing configuration entry */
    IDM_ERR_USAGE = 5,      /* API called outside its contract */
    IDM_ERR_CAPACITY = 6,   /* dataset too small for the requested operation */
    IDM_ERR_PROTOCOL = 7,   /* manifest lacks records the protocol needs */
    IDM_ERR_INTEGRITY = 8,  /* corrupted or inconsistent stored state */
    IDM_ERR_NUMERIC = 9,    /* non-finite value, or a failed numeric check */
    IDM_ERR_IO = 10,        /* filesystem failure */
    IDM_ERR_CAPABILITY = 11 /* operation unsupported by the selected detector */
} idm_status;

/* Description of the most recent failure on this thread; empty string when
 * the last call succeeded. The pointer stays valid until the next API call
 * on the same thread. */
IDM_API const char* idm_last_error(void);

/* "library <x.y.z>, manifest format <n>, checkpoint format <n>" */
IDM_API const char* idm_version(void);

/* Generates the synthetic protocol dataset described by the key-value config
 * file: genuine, forged, and self-reconstructed facial action trajectories
 * with disjoint train/test identity pools. Writes CSVs, manifest.json and
 * run.json under out_dir. */
IDM_API idm_status idm_synth_gen(const char* config_path, const char* out_dir, uint64_t seed);

typedef struct idm_train_options {
    int32_t epochs;                /* default 120 */
    int32_t steps_per_epoch;       /* 0: floor(#train forged / forged per batch) */
    double lr;                     /* default 1e-3 */
    double beta1;                  /* default 0.9 */
    double beta2;                  /* default 0.999 */
    double tau;                    /* default 0.07 */
    double lambda_;                /* default 0.1 */
    int32_t classes_per_batch;     /* default 8 */
    int32_t videos_per_class;      /* default 8 */
    int32_t genuine_per_class;     /* default 2; genuine videos inside each class */
    int32_t frame_pairs_per_video; /* default 16 */
    uint64_t seed;                 /* default 1 */
    int32_t checkpoint_every;      /* 0: final checkpoint only */
} idm_train_options;

/* Fills every field with its default. */
IDM_API void idm_train_options_init(idm_train_options* options);

/* Trains the identity detector on the manifest's train split; writes
 * loss_log.csv, cadence checkpoints, checkpoint_final.json and run.json
 * under out_dir. NULL options means all defaults. */
IDM_API idm_status idm_train(const char* manifest_path, const char* out_dir,
                             const idm_train_options* options);

/* Continues a checkpointed run to the step total implied by the options.
 * Differing training options proceed and are recorded in run.json. */
IDM_API idm_status idm_resume(const char* checkpoint_path, const char* manifest_path,
                              const char* out_dir, const idm_train_options* options);

/* Protocol evaluation. protocol: "conventional", "whitehat", "surrogate" or
 * "all"; surrogate_kind: "resize", "jpeg", "vc", "blur"; level 0..5;
 * detector: "idminer" (needs checkpoint_path) or "meanfeat" (trains its
 * logistic reference model on the train split, checkpoint ignored);
 * reference: "auto", "based" or "free". Writes score CSVs and a metrics JSON
 * under out_prefix. */
IDM_API idm_status idm_eval(const char* manifest_path, const char* checkpoint_path,
                            const char* protocol, const char* surrogate_kind,
                            int32_t surrogate_level, const char* detector, const char* reference,
                            const char* out_prefix);

/* Puppeteer re-identification over the test split: genuine probes against
 * the forged gallery. Writes <out_prefix>_reid.json. */
IDM_API idm_status idm_reid(const char* manifest_path, const char* checkpoint_path,
                            const char* detector, const char* out_prefix);

/* Surrogate sensitivity table: 4 kinds x levels 0..5, one AUC row each.
 * Writes <out_prefix>_sweep.csv. */
IDM_API idm_status idm_sweep(const char* manifest_path, const char* checkpoint_path,
                             const char* detector, const char* out_prefix);

/* Central-difference verification of all hand-derived gradients over
 * `configurations` seeded model/loss configurations. Writes a JSON report;
 * returns IDM_ERR_NUMERIC when the worst relative error reaches tolerance. */
IDM_API idm_status idm_grad_check(uint64_t seed, int32_t configurations, double tolerance,
                                  const char* report_path);

/* Metrics over an externally produced score CSV with the schema
 * pair_id,probe_id,reference_id,label,score. average_frames != 0 treats rows
 * sharing a pair_id as per-frame scores of one pair. */
IDM_API idm_status idm_eval_scores(const char* scores_path, int32_t average_frames,
                                   const char* out_prefix);

/* Opaque handle to a trained detector loaded from a checkpoint. */
typedef struct idm_model idm_model;

IDM_API idm_status idm_model_open(const char* checkpoint_path, idm_model** out_model);
IDM_API void idm_model_close(idm_model* model);

/* Length of the video representation vector. */
IDM_API idm_status idm_model_repr_dim(const idm_model* model, int32_t* out_dim);

/* Embeds one video given as a row-major frames array (t x d). out_repr must
 * hold repr_dim doubles. */
IDM_API idm_status idm_model_embed(const idm_model* model, const double* frames, int32_t t,
                                   int32_t d, double* out_repr);

/* Identity-consistency score of two videos in [0, 1]. */
IDM_API idm_status idm_model_score_pair(const idm_model* model, const double* probe_frames,
                                        int32_t probe_t, const double* reference_frames,
                                        int32_t reference_t, int32_t d, double* out_score);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* IDMINER_H */
