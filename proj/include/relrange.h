/*
 * relrange - acoustic inter-device ranging from relative room impulse
 * responses.
 *
 * C API of the shared library. All functions return rr_status; outputs are
 * trailing pointer arguments. Objects returned through rr_* handles must be
 * released with the matching *_free call. On failure the thread-local
 * message from rr_last_error() describes the problem.
 */

#ifndef RELRANGE_H
#define RELRANGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RR_API __declspec(dllexport)
#else
#define RR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rr_status {
  RR_OK = 0,
  RR_ERR_INVALID_ARGUMENT = 1,
  RR_ERR_IO = 2,
  RR_ERR_NUMERIC = 3,
  RR_ERR_UNSUPPORTED = 4,
  RR_ERR_INTERNAL = 5,
  RR_ERR_SILENT_FRAME = 6
} rr_status;

RR_API const char* rr_version(void);
RR_API const char* rr_last_error(void);

/* ------------------------------------------------------------------ */
/* Signals                                                             */

typedef struct rr_signal rr_signal;

RR_API rr_status rr_signal_create(const double* samples, size_t n,
                                  int sample_rate, rr_signal** out);
RR_API void rr_signal_free(rr_signal* sig);
RR_API rr_status rr_signal_samples(const rr_signal* sig, const double** data,
                                   size_t* n);
RR_API rr_status rr_signal_sample_rate(const rr_signal* sig, int* rate);
RR_API rr_status rr_signal_read_wav(const char* path, rr_signal** out);
RR_API rr_status rr_signal_write_wav(const char* path, const rr_signal* sig);

RR_API rr_status rr_white_noise(size_t n_samples, int sample_rate,
                                uint64_t seed, rr_signal** out);
RR_API rr_status rr_mix_at_snr(const rr_signal* clean, double snr_db,
                               uint64_t seed, rr_signal** out);
RR_API rr_status rr_energy_vad_concat(const rr_signal* speech, double frame_ms,
                                      double threshold_db, rr_signal** out);
RR_API rr_status rr_speech_like(double duration_s, int sample_rate,
                                uint64_t seed, rr_signal** out);

/* ------------------------------------------------------------------ */
/* Rooms and impulse responses                                         */

typedef struct rr_ir rr_ir;

typedef struct rr_room {
  double lx, ly, lz;      /* meters */
  double t60_s;           /* target reverberation time */
  int sample_rate;        /* Hz */
  double speed_of_sound;  /* m/s; 0 picks 343 */
} rr_room;

RR_API rr_status rr_ir_create(const double* taps, size_t n, int sample_rate,
                              rr_ir** out);
RR_API void rr_ir_free(rr_ir* ir);
RR_API rr_status rr_ir_taps(const rr_ir* ir, const double** taps, size_t* n);
RR_API rr_status rr_ir_sample_rate(const rr_ir* ir, int* rate);
RR_API rr_status rr_ir_read_wav(const char* path, rr_ir** out);
RR_API rr_status rr_ir_write_wav(const char* path, const rr_ir* ir);

RR_API rr_status rr_sabine_absorption(const rr_room* room, double* alpha);
RR_API rr_status rr_default_max_order(const rr_room* room, int* order);

/* max_order < 0 selects the per-room default. */
RR_API rr_status rr_simulate_rir(const rr_room* room, const double src[3],
                                 const double mic[3], int max_order,
                                 rr_ir** out);

/* Wearable placement by rejection sampling; the source lands 5 cm above the
 * speaker microphone. */
RR_API rr_status rr_random_placement(const rr_room* room,
                                     const double speaker_pos[3], uint64_t seed,
                                     double min_dist, double max_dist,
                                     double src_out[3], double mic_close_out[3],
                                     double mic_far_out[3]);

/* Full linear convolution of a signal with an impulse response. */
RR_API rr_status rr_convolve(const rr_signal* x, const rr_ir* ir,
                             rr_signal** out);

/* ------------------------------------------------------------------ */
/* Relative RIR estimation                                             */

typedef struct rr_ipnlms rr_ipnlms;
typedef struct rr_trace rr_trace;

typedef struct rr_sched_segment {
  double duration_s; /* the final segment extends to stream end */
  double mu;
} rr_sched_segment;

RR_API rr_status rr_ipnlms_create(size_t filter_length, double alpha,
                                  double delta, double epsilon,
                                  rr_ipnlms** out);
RR_API void rr_ipnlms_free(rr_ipnlms* state);
RR_API rr_status rr_ipnlms_step(rr_ipnlms* state, double x_n, double y_n,
                                double mu, double* error_out);
RR_API rr_status rr_ipnlms_taps(const rr_ipnlms* state, const double** taps,
                                size_t* n);

/* Batch identification; truth may be NULL (no NPM trace). trace_out may be
 * NULL when only the filter is wanted. use_float32 != 0 switches the inner
 * loops to single precision for long batch runs. */
RR_API rr_status rr_ipnlms_run(const rr_signal* x, const rr_signal* y,
                               size_t filter_length, double alpha,
                               const rr_sched_segment* schedule,
                               size_t n_segments, size_t trace_block,
                               int use_float32, const rr_ir* truth,
                               rr_ir** h_out, rr_trace** trace_out);

RR_API void rr_trace_free(rr_trace* trace);
RR_API rr_status rr_trace_size(const rr_trace* trace, size_t* n_blocks);
RR_API rr_status rr_trace_final_npm(const rr_trace* trace, double* npm_db);
RR_API rr_status rr_trace_write_csv(const rr_trace* trace, const char* path);

/* Ground-truth relative RIR by regularized spectral division.
 * modeling_delay_out (may be NULL) reports the prepended delay in samples
 * when the quotient would otherwise be non-causal. */
RR_API rr_status rr_ground_truth_relative_rir(const rr_ir* rir_close,
                                              const rr_ir* rir_far,
                                              size_t out_len, rr_ir** out,
                                              int* modeling_delay_out);

RR_API rr_status rr_npm(const rr_ir* h_true, const rr_ir* h_est,
                        double* npm_db);

/* ------------------------------------------------------------------ */
/* Features                                                            */

typedef struct rr_features {
  double c50_db;
  double drr_db;
  double t60_s;
  double srr_db;
  double sparseness;
  double distance_m; /* label; NaN when unknown */
  int t60_fallback;  /* 1 when T60 used the relaxed fit range */
} rr_features;

RR_API rr_status rr_clarity_c50(const rr_ir* h, double* c50_db);
RR_API rr_status rr_drr(const rr_ir* h, double* drr_db);
RR_API rr_status rr_sparseness(const rr_ir* h, double* s);
RR_API rr_status rr_srr(const rr_signal* x, const rr_signal* y, double* srr_db);

/* Energy decay curve; caller frees *edc_db with rr_buffer_free. */
RR_API rr_status rr_energy_decay_curve(const rr_ir* h, double** edc_db,
                                       size_t* n);
RR_API void rr_buffer_free(double* buffer);

RR_API rr_status rr_t60_from_edc(const double* edc_db, size_t n,
                                 int sample_rate, double* t60_s);

RR_API rr_status rr_extract_features(const rr_ir* h_hat, const rr_signal* x,
                                     const rr_signal* y, rr_features* out);

/* ------------------------------------------------------------------ */
/* Regression                                                          */

typedef struct rr_dataset rr_dataset;
typedef struct rr_model rr_model;

RR_API rr_status rr_dataset_read_csv(const char* path, rr_dataset** out);
RR_API void rr_dataset_free(rr_dataset* ds);
RR_API rr_status rr_dataset_size(const rr_dataset* ds, size_t* n);
RR_API rr_status rr_dataset_row(const rr_dataset* ds, size_t index,
                                rr_features* out);

/* Trains with a grid search when grid_json is NULL or "{}"; pass a config
 * JSON object to pin hyperparameters (fields: max_depth, learning_rate,
 * min_samples_leaf, subsample, max_rounds, early_stop_patience). val may be
 * NULL: a deterministic 90/10 split of train is used. */
RR_API rr_status rr_gbdt_train(const rr_dataset* train, const rr_dataset* val,
                               const char* grid_json, uint64_t seed,
                               rr_model** out);
RR_API void rr_model_free(rr_model* model);
RR_API rr_status rr_model_save(const rr_model* model, const char* path);
RR_API rr_status rr_model_load(const char* path, rr_model** out);
RR_API rr_status rr_model_predict(const rr_model* model,
                                  const rr_features* row, double* distance_m);

/* Mean relative error (%) and MSE of a model over a labelled dataset. */
RR_API rr_status rr_model_evaluate(const rr_model* model, const rr_dataset* ds,
                                   double* re_mean_pct, double* mse);

/* delta_mse_out must hold 5 doubles, one per feature in CSV column order. */
RR_API rr_status rr_permutation_importance(const rr_model* model,
                                           const rr_dataset* test,
                                           int n_repeats, uint64_t seed,
                                           double delta_mse_out[5]);

RR_API rr_status rr_welch_ttest(const double* sample_a, size_t na,
                                const double* sample_b, size_t nb, double* t,
                                double* p);

RR_API rr_status rr_relative_error(double d_tar, double d_pred, double* pct);

/* ------------------------------------------------------------------ */
/* Baseline                                                            */

typedef struct rr_tof {
  double distance_m;
  int frames_used;
  int frames_total;
} rr_tof;

/* RR_ERR_SILENT_FRAME flags a rejected (near-silent) frame. */
RR_API rr_status rr_gcc_phat_delay(const rr_signal* frame_x,
                                   const rr_signal* frame_y, double max_delay_s,
                                   double* delay_s);

/* window_s <= 0 picks the 300 ms default; max_delay_s <= 0 lets the window
 * length bound the search. */
RR_API rr_status rr_tof_distance(const rr_signal* x, const rr_signal* y,
                                 double window_s, double speed_of_sound,
                                 double max_delay_s, rr_tof* out);

/* ------------------------------------------------------------------ */
/* Experiment harness                                                  */

/* Writes the dataset CSV (plus ".tof.csv" sidecar) for one named room of the
 * config; seed_override < 0 keeps the config seed. */
RR_API rr_status rr_generate_dataset(const char* config_path,
                                     const char* room_name,
                                     const char* out_csv,
                                     int64_t seed_override);

/* Runs the full benchmark described by the config JSON and writes
 * report.json, per-room dataset and prediction CSVs under out_dir. */
RR_API rr_status rr_run_experiment(const char* config_path, const char* out_dir,
                                   int64_t seed_override);

/* Derived per-figure CSV tables from a report.json. */
RR_API rr_status rr_write_plotdata(const char* report_path, const char* out_dir);

/* Synthetic speech corpus for speech-mode experiments. */
RR_API rr_status rr_write_speech_corpus(const char* dir, int count,
                                        double duration_s, int sample_rate,
                                        uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* RELRANGE_H */
