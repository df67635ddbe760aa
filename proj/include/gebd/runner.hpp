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

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gebd/config.hpp"
#include "gebd/data.hpp"

namespace gebd::run {

// One corpus video with its single-annotator boundaries and the per-event
// boundary tags ("motion" | "appearance") recorded in the manifest.
struct CorpusVideo {
  data::VideoFrames frames;
  std::vector<double> boundaries_sec;
  std::vector<std::string> boundary_tags;
  std::string split;
};

// Loads every video of the requested split ("all", "train", "val") along
// with the sibling annotations.json. Fails atomically.
std::vector<CorpusVideo> load_corpus(const std::string& manifest_path, const std::string& split);

// Every command finalizes the config, creates the output location, writes
// resolved_config.json beside its artifacts, and returns a summary object.
// Failures throw gebd::Error.
nlohmann::json gen_synth(cfg::Config c, const std::string& out_dir);
nlohmann::json pretrain(cfg::Config c, const std::string& out_dir);
nlohmann::json finetune(cfg::Config c, const std::string& init_ckpt, const std::string& out_dir);
nlohmann::json detect(cfg::Config c, const std::string& ckpt_path, const std::string& manifest_path,
                      const std::string& out_path);
nlohmann::json eval(cfg::Config c, const std::string& pred_path, const std::string& gt_path,
                    const std::string& out_path);
nlohmann::json viz_motion(cfg::Config c, const std::string& ckpt_path,
                          const std::string& video_dir, const std::string& out_dir);

// gen-synth -> pretrain -> finetune (MS on / MS off / untrained baseline) ->
// detect -> eval, all under out_dir; emits summary.json with the held-out
// F1@0.05 of each run and their differences.
nlohmann::json smoke(cfg::Config c, const std::string& out_dir);

}  // namespace gebd::run
