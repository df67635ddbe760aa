// Copyright 2026 The gebdkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gebd_c.h"

#include <cstdlib>
#include <cstring>
#include <functional>
#include <new>
#include <string>

#include <json.hpp>

#include "gebd/common.hpp"
#include "gebd/config.hpp"
#include "gebd/runner.hpp"

using nlohmann::json;

struct gebd_session {
  gebd::cfg::Config config;
  std::string last_error;
};

namespace {

const char* code_name(gebd_status s) {
  switch (s) {
    case GEBD_OK: return "ok";
    case GEBD_E_INVALID: return "invalid_argument";
    case GEBD_E_IO: return "io_error";
    case GEBD_E_CONFIG: return "config_error";
    case GEBD_E_RUNTIME: return "runtime_error";
  }
  return "runtime_error";
}

gebd_status status_of(gebd::ErrorCode code) {
  switch (code) {
    case gebd::ErrorCode::invalid_argument: return GEBD_E_INVALID;
    case gebd::ErrorCode::io_error: return GEBD_E_IO;
    case gebd::ErrorCode::config_error: return GEBD_E_CONFIG;
    case gebd::ErrorCode::runtime_error: return GEBD_E_RUNTIME;
  }
  return GEBD_E_RUNTIME;
}

gebd_status fail(gebd_session* s, gebd_status status, const std::string& message) {
  s->last_error = json{{"code", code_name(status)}, {"error", message}}.dump();
  return status;
}

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (out) std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

// Shared wrapper: no exception escapes, the summary is only written on
// success, and the last error is rewritten on every failure.
gebd_status guarded(gebd_session* s, char** summary_json, const std::function<json()>& fn) {
  if (!s) return GEBD_E_INVALID;
  try {
    json summary = fn();
    if (summary_json) {
      char* out = copy_string(summary.dump());
      if (!out) return fail(s, GEBD_E_RUNTIME, "out of memory");
      *summary_json = out;
    }
    return GEBD_OK;
  } catch (const gebd::Error& e) {
    return fail(s, status_of(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(s, GEBD_E_RUNTIME, e.what());
  } catch (...) {
    return fail(s, GEBD_E_RUNTIME, "unknown failure");
  }
}

gebd_status require(gebd_session* s, const char* arg, const char* name) {
  if (arg) return GEBD_OK;
  return fail(s, GEBD_E_INVALID, std::string(name) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* gebd_version(void) { return "0.1.0"; }

gebd_session* gebd_session_new(void) { return new (std::nothrow) gebd_session(); }

void gebd_session_free(gebd_session* session) { delete session; }

const char* gebd_last_error(const gebd_session* session) {
  return session ? session->last_error.c_str() : "";
}

gebd_status gebd_config_file(gebd_session* session, const char* path) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, path, "path")) return st;
  return guarded(session, nullptr, [&] {
    session->config.merge_file(path);
    return json::object();
  });
}

gebd_status gebd_config_set(gebd_session* session, const char* key_equals_value) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, key_equals_value, "override")) return st;
  return guarded(session, nullptr, [&] {
    session->config.merge_override(key_equals_value);
    return json::object();
  });
}

gebd_status gebd_gen_synth(gebd_session* session, const char* out_dir, char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, out_dir, "out_dir")) return st;
  return guarded(session, summary_json,
                 [&] { return gebd::run::gen_synth(session->config, out_dir); });
}

gebd_status gebd_pretrain(gebd_session* session, const char* out_dir, char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, out_dir, "out_dir")) return st;
  return guarded(session, summary_json,
                 [&] { return gebd::run::pretrain(session->config, out_dir); });
}

gebd_status gebd_finetune(gebd_session* session, const char* init_ckpt, const char* out_dir,
                          char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, out_dir, "out_dir")) return st;
  std::string init = init_ckpt ? init_ckpt : "";
  return guarded(session, summary_json,
                 [&] { return gebd::run::finetune(session->config, init, out_dir); });
}

gebd_status gebd_detect(gebd_session* session, const char* ckpt, const char* video_manifest,
                        const char* out_path, char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, ckpt, "ckpt")) return st;
  if (gebd_status st = require(session, video_manifest, "video_manifest")) return st;
  if (gebd_status st = require(session, out_path, "out_path")) return st;
  return guarded(session, summary_json, [&] {
    return gebd::run::detect(session->config, ckpt, video_manifest, out_path);
  });
}

gebd_status gebd_eval(gebd_session* session, const char* pred_path, const char* gt_path,
                      const char* out_path, char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, pred_path, "pred_path")) return st;
  if (gebd_status st = require(session, gt_path, "gt_path")) return st;
  if (gebd_status st = require(session, out_path, "out_path")) return st;
  return guarded(session, summary_json, [&] {
    return gebd::run::eval(session->config, pred_path, gt_path, out_path);
  });
}

gebd_status gebd_viz_motion(gebd_session* session, const char* ckpt, const char* video_dir,
                            const char* out_dir, char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, ckpt, "ckpt")) return st;
  if (gebd_status st = require(session, video_dir, "video_dir")) return st;
  if (gebd_status st = require(session, out_dir, "out_dir")) return st;
  return guarded(session, summary_json, [&] {
    return gebd::run::viz_motion(session->config, ckpt, video_dir, out_dir);
  });
}

gebd_status gebd_smoke(gebd_session* session, const char* out_dir, char** summary_json) {
  if (!session) return GEBD_E_INVALID;
  if (gebd_status st = require(session, out_dir, "out_dir")) return st;
  return guarded(session, summary_json,
                 [&] { return gebd::run::smoke(session->config, out_dir); });
}

void gebd_string_free(char* s) { std::free(s); }

}  // extern "C"
