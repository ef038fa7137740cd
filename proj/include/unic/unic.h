/* SPDX-License-Identifier: Apache-2.0 */
#ifndef UNIC_UNIC_H
#define UNIC_UNIC_H

#include <stdint.h>

#if defined(_WIN32)
#define UNIC_API __declspec(dllexport)
#else
#define UNIC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum unic_status {
  UNIC_OK = 0,
  UNIC_ERR_INVALID_ARGUMENT = 1,
  UNIC_ERR_IO = 2,
  UNIC_ERR_INFEASIBLE = 3,
  UNIC_ERR_NOT_FOUND = 4,
  UNIC_ERR_NUMERIC = 5,
  UNIC_ERR_STATE = 6,
  UNIC_ERR_INTERNAL = 7
} unic_status;

typedef struct unic_model unic_model;
typedef struct unic_server unic_server;

/* Message of the last failed call on this thread; never NULL. */
UNIC_API const char* unic_last_error(void);
UNIC_API const char* unic_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
UNIC_API void unic_string_free(char* s);

/* Dataset construction. `summary_json` may be NULL. */
UNIC_API unic_status unic_build_dataset(const char* input_dir, const char* kind, uint64_t seed,
                                        const char* out_jsonl, char** summary_json);
UNIC_API unic_status unic_make_synthetic(int count, uint64_t seed, const char* out_dir, char** summary_json);

/* Trains from a key-value config file. `seed` overrides the config's seed.
 * `log_jsonl` receives one record per epoch; `eval_jsonl` (optional) is
 * evaluated after every epoch. */
UNIC_API unic_status unic_train(const char* config_path, const char* data_jsonl, uint64_t seed,
                                const char* out_ckpt, const char* log_jsonl, const char* eval_jsonl,
                                char** summary_json);

UNIC_API unic_status unic_model_load(const char* ckpt_path, unic_model** out);
UNIC_API void unic_model_free(unic_model* model);
UNIC_API unic_status unic_model_info(const unic_model* model, char** info_json);

/* mode: "view" or "crop". */
UNIC_API unic_status unic_evaluate(const unic_model* model, const char* data_jsonl, const char* mode,
                                   char** report_json);

/* Multi-step recommendation on one image. `viewport` is world-normalized
 * center form [x, y, w, h]; NULL selects the largest centered view of the
 * given orientation ("landscape" or "portrait"). */
UNIC_API unic_status unic_recommend(const unic_model* model, const char* image_path, const double* viewport,
                                    const char* orientation, int max_steps, char** trajectory_json);

/* HTTP session service. The model must outlive the server. port 0 binds a
 * free port; static_dir (optional) is served at "/". */
UNIC_API unic_status unic_server_start(const unic_model* model, const char* host, int port,
                                       const char* static_dir, unic_server** out);
UNIC_API int unic_server_port(const unic_server* server);
UNIC_API void unic_server_stop(unic_server* server);
/* Stops (if needed), joins and frees. */
UNIC_API void unic_server_free(unic_server* server);

#ifdef __cplusplus
}
#endif

#endif /* UNIC_UNIC_H */
