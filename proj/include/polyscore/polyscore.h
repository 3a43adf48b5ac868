#ifndef POLYSCORE_POLYSCORE_H
#define POLYSCORE_POLYSCORE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(POLYSCORE_BUILDING_LIBRARY)
#define PS_API __declspec(dllexport)
#else
#define PS_API __declspec(dllimport)
#endif
#else
#define PS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every fallible call returns one and records a message that
 * ps_last_error() returns on the same thread. */
typedef enum ps_status {
  PS_OK = 0,
  PS_ERR_INVALID_ARGUMENT = 1,
  PS_ERR_SHAPE_MISMATCH = 2,
  PS_ERR_NON_FINITE = 3,
  PS_ERR_UNSUPPORTED = 4,
  PS_ERR_OVERFLOW = 5,
  PS_ERR_GEOMETRY = 6,
  PS_ERR_PARAMETER_MISMATCH = 7,
  PS_ERR_BUDGET_EXHAUSTED = 8,
  PS_ERR_NO_PARAMETER_SET = 9,
  PS_ERR_PROTOCOL = 10,
  PS_ERR_IO = 11,
  PS_ERR_CONFIG = 12,
  PS_ERR_DIVERGENCE = 13,
  PS_ERR_KEY_CONFINEMENT = 14,
  PS_ERR_ACCURACY_REGRESSION = 15,
  PS_ERR_INTERNAL = 16
} ps_status;

PS_API const char* ps_version(void);
PS_API const char* ps_status_name(ps_status status);
/* Message of the last failed call on this thread ("" if none). */
PS_API const char* ps_last_error(void);
/* Frees strings returned through char** out-parameters. */
PS_API void ps_free_string(char* s);

typedef struct ps_model ps_model;
typedef struct ps_server ps_server;
typedef struct ps_client ps_client;
typedef struct ps_result ps_result;

/* ---- keys ---------------------------------------------------------------- */

/* Generates a key set for a named parameter set and writes the public,
 * secret and evaluation keys to three separate files. seed < 0 draws entropy. */
PS_API ps_status ps_keygen(const char* params, int64_t seed, const char* pk_path, const char* sk_path,
                           const char* ek_path);

/* Comma-separated names of the built-in parameter sets. */
PS_API ps_status ps_parameter_sets(char** names);

/* ---- models -------------------------------------------------------------- */

PS_API ps_status ps_model_load(const char* path, ps_model** out);
PS_API ps_status ps_model_save(const ps_model* model, const char* path);
PS_API void ps_model_free(ps_model* model);
/* JSON summary: layers, dimensions, HE compatibility, depth, quantization. */
PS_API ps_status ps_model_describe(const ps_model* model, char** json);
/* Smallest built-in parameter set that holds the model's integer circuit. */
PS_API ps_status ps_model_plan_parameters(const ps_model* model, char** params);

/* Training runs on the built-in synthetic frame-classification task. */
typedef struct ps_train_options {
  const size_t* hidden; /* hidden layer widths */
  size_t hidden_count;
  const char* activation; /* "relu" or "sigmoid" */
  int epochs;
  double learning_rate;
  size_t minibatch_size;
  uint64_t seed;
  uint64_t task_seed;
} ps_train_options;

PS_API void ps_train_options_init(ps_train_options* options);
/* Trains a float network; heldout_accuracy may be NULL. */
PS_API ps_status ps_train(const ps_train_options* options, ps_model** out, double* heldout_accuracy);

/* Polynomial conversion followed by `finetune_epochs` of float training
 * (none when 0). */
PS_API ps_status ps_convert(const ps_model* model, int finetune_epochs, double learning_rate, uint64_t seed,
                            uint64_t task_seed, ps_model** out, double* heldout_accuracy);

typedef struct ps_quantize_options {
  int bits;
  int retrain_epochs; /* 0 = quantize only */
  double learning_rate;
  uint64_t seed;
  uint64_t task_seed;
  const char* report_path; /* optional CSV of per-epoch records */
} ps_quantize_options;

PS_API void ps_quantize_options_init(ps_quantize_options* options);
PS_API ps_status ps_quantize(const ps_model* model, const ps_quantize_options* options, ps_model** out,
                             double* quantized_accuracy, double* retrained_accuracy);

/* Toy-task accuracy grid over bit widths: rows "quantize-only" and
 * "retrained", one column per width. When `assert_trend` is set and the
 * quantize-only row increases as bits shrink, returns
 * PS_ERR_ACCURACY_REGRESSION (the grid is still produced). */
PS_API ps_status ps_bench(const int* bits, size_t count, uint64_t seed, int assert_trend, char** grid_csv);

/* Writes `frames` held-out frames of the toy task as a feature file. */
PS_API ps_status ps_export_toy_features(const char* path, size_t frames, size_t offset, uint64_t task_seed);

/* ---- serving ------------------------------------------------------------- */

typedef struct ps_server_options {
  const char* listen;      /* "host:port"; port 0 picks a free one */
  const char* params;      /* comma-separated accepted sets; NULL = every set that fits */
  const char* pk_path;     /* with ek_path: accept only this key pair */
  const char* ek_path;
  size_t threads;          /* scoring threads per batch */
  size_t max_connections;  /* 0 = unlimited */
  const char* log_path;    /* per-batch CSV log; NULL = none */
} ps_server_options;

PS_API void ps_server_options_init(ps_server_options* options);
/* Binds the listening socket. */
PS_API ps_status ps_server_create(const ps_model* model, const ps_server_options* options, ps_server** out);
PS_API uint16_t ps_server_port(const ps_server* server);
/* Serves connections until max_connections have finished or ps_server_stop. */
PS_API ps_status ps_server_run(ps_server* server);
/* Thread-safe; makes ps_server_run return. */
PS_API void ps_server_stop(ps_server* server);
PS_API void ps_server_free(ps_server* server);

/* ---- client -------------------------------------------------------------- */

typedef struct ps_client_options {
  const char* params;   /* parameter set name, optionally "name/sim" */
  int64_t seed;         /* < 0 draws entropy */
  size_t batch_size;    /* frames per message; 0 = default */
  int softmax;          /* normalize scores into probabilities */
  const char* pk_path;  /* existing keys (all three) instead of fresh ones */
  const char* sk_path;
  const char* ek_path;
} ps_client_options;

PS_API void ps_client_options_init(ps_client_options* options);
/* Connects to a server and completes the handshake. */
PS_API ps_status ps_client_connect(const char* endpoint, const ps_client_options* options, ps_client** out);
/* Runs the server role in-process with the given model. */
PS_API ps_status ps_client_local(const ps_model* model, const ps_client_options* options, size_t threads,
                                 ps_client** out);
/* Encrypts, scores and decodes one utterance. graph_path may be NULL. */
PS_API ps_status ps_client_infer_file(ps_client* client, const char* features_path, const char* graph_path,
                                      ps_result** out);
PS_API ps_status ps_client_infer(ps_client* client, const float* frames, size_t frame_count, size_t dims,
                                 const char* graph_path, ps_result** out);
/* Per-utterance latency CSV for everything this client has run. */
PS_API ps_status ps_client_latency_csv(const ps_client* client, char** csv);
PS_API ps_status ps_client_latency_table(const ps_client* client, char** table);
/* Sends BYE and waits for the reply. */
PS_API ps_status ps_client_close(ps_client* client);
PS_API void ps_client_free(ps_client* client);

PS_API size_t ps_result_frames(const ps_result* result);
PS_API size_t ps_result_dims(const ps_result* result);
/* Row-major frames x dims scores. */
PS_API const double* ps_result_scores(const ps_result* result);
PS_API int ps_result_flagged(const ps_result* result, size_t frame);
PS_API const char* ps_result_transcript(const ps_result* result);
/* encryption, AM scoring, decryption, decoding, overall (ms). */
PS_API void ps_result_latency(const ps_result* result, double out[5]);
PS_API ps_status ps_result_save_posteriors(const ps_result* result, const char* path);
PS_API void ps_result_free(ps_result* result);

/* ---- decoding and checks ------------------------------------------------- */

/* Viterbi over a posterior file; graph_path NULL means a uniform graph. */
PS_API ps_status ps_decode_file(const char* posteriors_path, const char* graph_path, char** transcript);

/* Sim-vs-real differential over random operation sequences. Returns
 * PS_ERR_INTERNAL with the report still set when the backends disagree. */
PS_API ps_status ps_selftest(const char* params, size_t sequences, uint64_t seed, char** report);

#ifdef __cplusplus
}
#endif

#endif
