/* Copyright 2026 The gebdkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the gebdkit boundary-detection library. A session carries a
 * run configuration; each command finalizes a copy of it, runs, and hands
 * back a JSON summary string. No exceptions cross this boundary and no
 * global state is shared between sessions.
 */

#ifndef GEBD_C_H_
#define GEBD_C_H_

#ifdef __cplusplus
extern "C" {
#endif

#ifndef GEBD_API
#define GEBD_API __attribute__((visibility("default")))
#endif

typedef struct gebd_session gebd_session;

typedef enum gebd_status {
  GEBD_OK = 0,
  GEBD_E_INVALID = 1, /* bad argument or malformed input */
  GEBD_E_IO = 2,      /* file or directory failure */
  GEBD_E_CONFIG = 3,  /* unknown key, bad value, failed validation */
  GEBD_E_RUNTIME = 4, /* anything else, e.g. non-finite loss */
} gebd_status;

/* Library version, static storage. */
GEBD_API const char* gebd_version(void);

/* Sessions are cheap; one per run or one per process both work. A session
 * must not be used from two threads at once. Returns NULL on allocation
 * failure. */
GEBD_API gebd_session* gebd_session_new(void);
GEBD_API void gebd_session_free(gebd_session* session);

/* Merges a config file (flat JSON object or key=value lines) into the
 * session configuration. */
GEBD_API gebd_status gebd_config_file(gebd_session* session, const char* path);

/* Applies one "key=value" override. */
GEBD_API gebd_status gebd_config_set(gebd_session* session, const char* key_equals_value);

/* Last failure as a one-line JSON object {"code": "...", "error": "..."}.
 * Owned by the session; valid until its next failing call. Empty string if
 * nothing failed yet. */
GEBD_API const char* gebd_last_error(const gebd_session* session);

/* Commands. On success, *summary_json (when non-NULL) receives a
 * malloc-allocated JSON summary to release with gebd_string_free. On
 * failure the summary is untouched and gebd_last_error describes the
 * problem. Artifacts land under the given output path; every command also
 * writes resolved_config.json beside them. */
GEBD_API gebd_status gebd_gen_synth(gebd_session* session, const char* out_dir,
                                    char** summary_json);
GEBD_API gebd_status gebd_pretrain(gebd_session* session, const char* out_dir,
                                   char** summary_json);
/* init_ckpt may be NULL or empty to fine-tune from a fresh encoder. */
GEBD_API gebd_status gebd_finetune(gebd_session* session, const char* init_ckpt,
                                   const char* out_dir, char** summary_json);
GEBD_API gebd_status gebd_detect(gebd_session* session, const char* ckpt,
                                 const char* video_manifest, const char* out_path,
                                 char** summary_json);
GEBD_API gebd_status gebd_eval(gebd_session* session, const char* pred_path,
                               const char* gt_path, const char* out_path, char** summary_json);
GEBD_API gebd_status gebd_viz_motion(gebd_session* session, const char* ckpt,
                                     const char* video_dir, const char* out_dir,
                                     char** summary_json);
GEBD_API gebd_status gebd_smoke(gebd_session* session, const char* out_dir, char** summary_json);

GEBD_API void gebd_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GEBD_C_H_ */
