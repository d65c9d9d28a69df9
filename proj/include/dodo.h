/*
 * C interface to the dodo context-compression library.
 *
 * All entry points return a dodo_status; on failure, dodo_last_error()
 * describes the problem (thread-local). Objects returned through out
 * parameters are owned by the caller and released with the matching
 * *_free function. A dodo_stream borrows its model: the model must stay
 * alive for the stream's lifetime.
 */

#ifndef DODO_H
#define DODO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DODO_API __declspec(dllexport)
#else
#define DODO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dodo_status {
  DODO_OK = 0,
  DODO_ERR_INVALID_ARG = 1,
  DODO_ERR_LENGTH = 2,
  DODO_ERR_CONFIG = 3,
  DODO_ERR_VOCAB = 4,
  DODO_ERR_DECODE = 5,
  DODO_ERR_CALIBRATION = 6,
  DODO_ERR_IO = 7,
  DODO_ERR_FORMAT = 8,
  DODO_ERR_NAN_LOSS = 9,
  DODO_ERR_STATE = 10
} dodo_status;

typedef struct dodo_model dodo_model;
typedef struct dodo_stream dodo_stream;
typedef struct dodo_report dodo_report;

DODO_API const char* dodo_version(void);
DODO_API const char* dodo_status_name(dodo_status status);
DODO_API const char* dodo_last_error(void);
DODO_API void dodo_string_free(char* s);

/* --- model lifecycle ----------------------------------------------------- */

/*
 * Creates a model: `config_text` holds key=value lines layered over the
 * defaults (may be NULL), `scheme` is "char" or "whitespace", and the
 * vocabulary is fitted from the corpus file before parameters are drawn
 * from `seed`.
 */
DODO_API dodo_status dodo_model_create(const char* config_text, const char* scheme,
                                       const char* corpus_path, uint64_t seed,
                                       dodo_model** out);
DODO_API dodo_status dodo_model_load(const char* path, dodo_model** out);
DODO_API dodo_status dodo_model_save(const dodo_model* model, const char* path);
DODO_API void dodo_model_free(dodo_model* model);

/* Current configuration as key=value text. */
DODO_API dodo_status dodo_model_config_text(const dodo_model* model, char** out_text);
/*
 * Applies run-time configuration overrides (ratio, tau, lambda, segment).
 * Structural fields of an initialized model cannot change.
 */
DODO_API dodo_status dodo_model_apply_config(dodo_model* model, const char* config_text);
DODO_API dodo_status dodo_model_vocab_size(const dodo_model* model, uint32_t* out);

/* --- reports -------------------------------------------------------------- */

DODO_API size_t dodo_report_size(const dodo_report* report);
DODO_API const char* dodo_report_key(const dodo_report* report, size_t index);
DODO_API const char* dodo_report_value(const dodo_report* report, size_t index);
/* NULL when the key is absent. */
DODO_API const char* dodo_report_get(const dodo_report* report, const char* key);
DODO_API void dodo_report_free(dodo_report* report);

/* --- training ------------------------------------------------------------- */

typedef struct dodo_train_options {
  uint64_t steps;
  double lr;
  uint64_t warmup;
  uint64_t seed;
  uint32_t log_every;
  const char* checkpoint_dir; /* per-epoch checkpoints when non-NULL */
  const char* task;           /* "autoencode" | "continue" */
  const char* variant;        /* "dodo" | "plain" | "compressive" */
  const char* mode;           /* "topk" | "threshold" */
} dodo_train_options;

DODO_API void dodo_train_options_init(dodo_train_options* options);

DODO_API dodo_status dodo_train_compressor(dodo_model* model, const char* corpus_path,
                                           const dodo_train_options* options,
                                           dodo_report** report);
DODO_API dodo_status dodo_train_lm(dodo_model* model, const char* corpus_path,
                                   const dodo_train_options* options, dodo_report** report);

/* --- evaluation ----------------------------------------------------------- */

/* Greedy-reconstruction BLEU at each requested compression ratio. */
DODO_API dodo_status dodo_eval_autoencode(const dodo_model* model, const char* corpus_path,
                                          const double* ratios, size_t ratio_count,
                                          dodo_report** report);

/*
 * Matched-budget LM evaluation: every prediction sees k = ceil(distant/ratio)
 * compressed states plus tau raw states. `variant` selects the system:
 * "dodo", "compressive", or "full" (truncated context).
 */
DODO_API dodo_status dodo_eval_lm(const dodo_model* model, const char* corpus_path,
                                  const char* variant, double ratio, uint32_t tau,
                                  dodo_report** report);

/* --- compression, inspection, calibration, oracle ------------------------- */

/* Compresses one corpus line into a nugget-state artifact file. */
DODO_API dodo_status dodo_compress_document(const dodo_model* model, const char* corpus_path,
                                            size_t line_index, const char* mode,
                                            const char* artifact_path, dodo_report** report);

/* Per-token dump: token<TAB>score<TAB>selected, plus frequency statistics. */
DODO_API dodo_status dodo_inspect_scores(const dodo_model* model, const char* corpus_path,
                                         const char* mode, const char* dump_path,
                                         dodo_report** report);

/* Quantile calibration; the resulting lambda is stored in the model config. */
DODO_API dodo_status dodo_calibrate_threshold(dodo_model* model, const char* corpus_path,
                                              double ratio, dodo_report** report);

/* Greedy optimal-selection search against the exhaustive-style evaluator. */
DODO_API dodo_status dodo_oracle(const dodo_model* model, const char* corpus_path,
                                 size_t context_len, size_t continuation_len, double ratio,
                                 size_t max_docs, dodo_report** report);

/* --- streaming ------------------------------------------------------------ */

DODO_API dodo_status dodo_stream_new(const dodo_model* model, uint32_t seg, uint32_t tau,
                                     double lambda, dodo_stream** out);
/* `logits` receives vocab-size doubles for the next-token distribution. */
DODO_API dodo_status dodo_stream_step(dodo_stream* stream, uint32_t token, double* logits);
DODO_API dodo_status dodo_stream_counts(const dodo_stream* stream, size_t* recent,
                                        size_t* nuggets);
DODO_API void dodo_stream_free(dodo_stream* stream);

/* --- tokenizer and text utilities ----------------------------------------- */

DODO_API dodo_status dodo_tokenize(const dodo_model* model, const char* text, uint32_t** ids,
                                   size_t* count);
DODO_API void dodo_ids_free(uint32_t* ids);
DODO_API dodo_status dodo_detokenize(const dodo_model* model, const uint32_t* ids, size_t count,
                                     char** text);

DODO_API dodo_status dodo_normalize_answer(const char* text, char** out);
/* 1 = match, 0 = no match, -1 = error. */
DODO_API int dodo_answer_matches(const char* output, const char* gold);
DODO_API double dodo_bleu(const uint32_t* candidate, size_t candidate_len,
                          const uint32_t* reference, size_t reference_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* DODO_H */
