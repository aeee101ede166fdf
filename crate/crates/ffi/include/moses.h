#ifndef MOSES_H
#define MOSES_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MosesStatus {
  MOSES_STATUS_OK = 0,
  MOSES_STATUS_NULL_POINTER = 1,
  MOSES_STATUS_INVALID_ARGUMENT = 2,
  MOSES_STATUS_DATA_ERROR = 3,
  MOSES_STATUS_IO_ERROR = 4,
  MOSES_STATUS_PANIC = 5,
} MosesStatus;

// Fitted detector.
typedef struct MosesModel MosesModel;

// Reference repository built from labelled samples.
typedef struct MosesRepository MosesRepository;

typedef struct MosesVerdict {
  // 1 for human, 0 for AI.
  int32_t label;
  // Probability that the text is human-written.
  double probability;
  double confidence;
  double threshold_estimate;
  // Zero when `has_variance` is false.
  double threshold_variance;
  bool has_variance;
  size_t n_activated;
} MosesVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *moses_last_error(void);

// Library version as a static NUL-terminated string.
const char *moses_version(void);

// Ingests a labelled JSONL file, compressing embeddings to `r` dimensions.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MosesStatus moses_repository_ingest_jsonl(const char *path,
                                               size_t r,
                                               struct MosesRepository **out);

// Loads a repository snapshot.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MosesStatus moses_repository_load(const char *path, struct MosesRepository **out);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `repo` must be null or a live handle.
size_t moses_repository_len(const struct MosesRepository *repo);

// # Safety
// `repo` must be null or a handle not yet freed.
void moses_repository_free(struct MosesRepository *repo);

// Fits a detector. `config_toml` may be null for defaults; otherwise it holds
// the same keys as the CLI config file.
//
// # Safety
// `repo` must be a live handle, `config_toml` null or NUL-terminated, and
// `out` a valid pointer.
enum MosesStatus moses_model_fit(const struct MosesRepository *repo,
                                 const char *config_toml,
                                 struct MosesModel **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MosesStatus moses_model_load(const char *path, struct MosesModel **out);

// # Safety
// `model` must be a live handle and `path` NUL-terminated.
enum MosesStatus moses_model_save(const struct MosesModel *model, const char *path);

// Classifies one text. `token_logprobs` may be null only when `lps_len` is 0.
//
// # Safety
// `model` must be a live handle, `text` NUL-terminated, the arrays valid for
// their stated lengths, and `out` a valid pointer.
enum MosesStatus moses_model_detect(const struct MosesModel *model,
                                    const char *text,
                                    const double *embedding,
                                    size_t emb_len,
                                    const double *token_logprobs,
                                    size_t lps_len,
                                    double score,
                                    struct MosesVerdict *out);

// # Safety
// `model` must be null or a handle not yet freed.
void moses_model_free(struct MosesModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOSES_H */
