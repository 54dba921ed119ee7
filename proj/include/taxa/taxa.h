#ifndef TAXA_H
#define TAXA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(TAXA_BUILDING)
#    define TAXA_API __declspec(dllexport)
#  else
#    define TAXA_API __declspec(dllimport)
#  endif
#else
#  define TAXA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values are stable across releases. */
typedef enum taxa_status {
  TAXA_OK = 0,
  TAXA_INVALID_ARGUMENT = 1,
  TAXA_EMPTY_CODER_ID = 2,
  TAXA_DUPLICATE_IMAGE = 3,
  TAXA_NO_SUCH_TAXON = 4,
  TAXA_DUPLICATE_SIBLING = 5,
  TAXA_INVALID_PARTITION = 6,
  TAXA_NOTHING_TO_FLATTEN = 7,
  TAXA_NON_LEAF_MERGE = 8,
  TAXA_SELF_MERGE = 9,
  TAXA_CYCLIC_MOVE = 10,
  TAXA_CANNOT_REMOVE_ROOT = 11,
  TAXA_NON_LEAF_LABEL = 12,
  TAXA_NO_SUCH_IMAGE = 13,
  TAXA_NO_SUCH_ASSIGNMENT = 14,
  TAXA_CORRUPT_LOG = 15,
  TAXA_INVALID_NAME = 16,
  TAXA_RESERVED_TAXON = 17,
  TAXA_ROOT_OPERAND = 18,
  TAXA_IMAGE_SET_MISMATCH = 19,
  TAXA_DIM_MISMATCH = 20,
  TAXA_TOO_MANY_CLUSTERS = 21,
  TAXA_MISSING_EMBEDDING = 22,
  TAXA_EMPTY_LABELED_SET = 23,
  TAXA_EMPTY_PROBABILITY_ROW = 24,
  TAXA_NOT_ENOUGH_DATA = 25,
  TAXA_FORMAT_ERROR = 26,
  TAXA_NOT_ENOUGH_IMAGES = 27,
  TAXA_NO_SUCH_SESSION = 28,
  TAXA_VERSION_CONFLICT = 29,
  TAXA_DECODE_ERROR = 30,
  TAXA_IO_ERROR = 31,
  TAXA_NOT_A_LEAF = 32,
  TAXA_INTERNAL = 99
} taxa_status;

typedef struct taxa_session taxa_session;
typedef struct taxa_server taxa_server;

TAXA_API const char* taxa_version_string(void);
/* Symbolic name of a status, e.g. "NonLeafLabel". */
TAXA_API const char* taxa_status_name(taxa_status status);

/* Message and details (JSON array) of the last failure on this thread.
   Valid until the next failing call on the same thread. */
TAXA_API const char* taxa_last_error(void);
TAXA_API const char* taxa_last_error_details(void);

/* Strings returned through char** out-parameters are owned by the caller. */
TAXA_API void taxa_string_free(char* s);

/* ---- sessions ---------------------------------------------------------- */

TAXA_API taxa_status taxa_session_create(const char* coder_id, const char* session_id, taxa_session** out);
TAXA_API taxa_status taxa_session_load(const char* bytes, size_t len, taxa_session** out);
TAXA_API taxa_status taxa_session_load_file(const char* path, taxa_session** out);
TAXA_API taxa_status taxa_session_clone(const taxa_session* session, taxa_session** out);
TAXA_API void taxa_session_free(taxa_session* session);

TAXA_API taxa_status taxa_session_save(const taxa_session* session, char** out_json);
TAXA_API taxa_status taxa_session_save_file(const taxa_session* session, const char* path);

/* op_json: {"op": "create_taxon", "parent": [...], "name": "..."} and so on.
   On failure the session is unchanged. */
TAXA_API taxa_status taxa_session_apply(taxa_session* session, const char* op_json, uint64_t* out_version);
TAXA_API uint64_t taxa_session_version(const taxa_session* session);

/* filter_json: {"taxon": [...]} | {"q": "..."} | {"uuid": "..."}; returns a JSON array of uuids. */
TAXA_API taxa_status taxa_session_query(const taxa_session* session, const char* filter_json, char** out_json);
/* {"uuid": {"paths": [[...]], "unsure": bool}, ...} */
TAXA_API taxa_status taxa_session_labels(const taxa_session* session, char** out_json);

/* ---- comparison -------------------------------------------------------- */

/* strategy: "union" or "majority". */
TAXA_API taxa_status taxa_merge(const taxa_session* const* sessions, size_t n, const char* strategy,
                                char** out_json);
/* Indented text rendering of the union merge. */
TAXA_API taxa_status taxa_diff(const taxa_session* const* sessions, size_t n, char** out_text);
/* depth <= 0 means full depth. Metrics use the images shared by all sessions. */
TAXA_API taxa_status taxa_metrics(const taxa_session* const* sessions, size_t n, int depth, char** out_json);
TAXA_API taxa_status taxa_render_report(const char* report_json, char** out_text);
TAXA_API taxa_status taxa_dissensus(const taxa_session* const* sessions, size_t n, char** out_json);

/* ---- ingest, assistance, prediction ------------------------------------ */

TAXA_API taxa_status taxa_sample(const char* dataset_path, size_t batch_size, size_t n_batches, uint64_t seed,
                                 char** out_json);
/* captions_path may be NULL. */
TAXA_API taxa_status taxa_cluster(const taxa_session* session, const char* path_json, const char* embeddings_path,
                                  const char* captions_path, uint64_t seed, char** out_json);
/* targets_json: JSON array of uuids, or NULL for every embedded image without a label. */
TAXA_API taxa_status taxa_predict_similarity(const char* labels_path, const char* embeddings_path,
                                             const char* targets_json, char** out_json);
TAXA_API taxa_status taxa_predict_zeroshot(const char* probs_path, double threshold, char** out_json);
/* depth <= 0 means full depth. */
TAXA_API taxa_status taxa_evaluate(const char* pred_path, const char* gold_path, int depth, char** out_json);
TAXA_API taxa_status taxa_evaluate_loo(const char* labels_path, const char* embeddings_path, int depth,
                                       char** out_json);

/* Fallback embedding of one image file into out[0..127]. */
TAXA_API taxa_status taxa_embed_file(const char* image_path, double* out, size_t out_len);
/* Embeddings JSON Lines for n image files, keyed by the given uuids. */
TAXA_API taxa_status taxa_embed_files(const char* const* uuids, const char* const* paths, size_t n,
                                      char** out_jsonl);
/* Same, for every dataset record with a local file field (path, localPath or file). */
TAXA_API taxa_status taxa_embed_dataset(const char* dataset_path, char** out_jsonl);

/* ---- service ----------------------------------------------------------- */

/* config_json keys: host, port, data_dir, dataset, embeddings, captions,
   probabilities, static_dir, cors_origin, worker_threads. */
TAXA_API taxa_status taxa_server_create(const char* config_json, taxa_server** out);
TAXA_API taxa_status taxa_server_bind(taxa_server* server, int* out_port);
/* Blocks until taxa_server_stop. */
TAXA_API taxa_status taxa_server_run(taxa_server* server);
TAXA_API void taxa_server_stop(taxa_server* server);
TAXA_API void taxa_server_free(taxa_server* server);

#ifdef __cplusplus
}
#endif

#endif
