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

#include "gebd/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "gebd/common.hpp"
#include "gebd/jsonio.hpp"

namespace gebd::cfg {

using nlohmann::json;

Config::Config() {
  json& v = values_;
  v["variant"] = "tiny";
  v["seed"] = 1;
  v["workers"] = 1;
  v["corpus.manifest"] = "";

  v["gen.count"] = 80;
  v["gen.length"] = 120;
  v["gen.side"] = 32;
  v["gen.fps"] = 10.0;
  v["gen.format"] = "png";
  v["gen.min_events"] = 2;
  v["gen.max_events"] = 4;

  v["pretrain.queue_size"] = 256;
  v["pretrain.batch_size"] = 4;
  v["pretrain.temperature"] = 0.01;
  v["pretrain.lr"] = 0.01;
  v["pretrain.sgd_momentum"] = 0.9;
  v["pretrain.weight_decay"] = 0.0;
  v["pretrain.key_momentum"] = 0.99;
  v["pretrain.epochs"] = 12;
  v["pretrain.warmup_epochs"] = 1;
  v["pretrain.k"] = 3;
  v["pretrain.clip_len"] = 4;
  v["pretrain.weight_intra"] = 1.0;
  v["pretrain.weight_inter"] = 1.0;
  v["pretrain.weight_segment"] = 1.0;
  v["pretrain.weight_order"] = 1.0;

  v["finetune.labels"] = "soft";
  v["finetune.sigma"] = 3.0;
  v["finetune.batch_size"] = 8;
  v["finetune.lr"] = 0.005;
  v["finetune.sgd_momentum"] = 0.9;
  v["finetune.weight_decay"] = 0.0;
  v["finetune.epochs"] = 8;
  v["finetune.patience"] = 3;
  v["finetune.max_steps_per_epoch"] = 30;
  v["finetune.val_threshold"] = 0.05;
  v["finetune.freeze_encoder"] = false;
  v["finetune.window"] = 5;
  v["finetune.dilation"] = 3;
  v["finetune.candidate_stride"] = 3;
  v["finetune.include_candidate"] = false;
  v["finetune.hidden"] = 0;  // 0 = by variant: 64 tiny, 512 full
  v["finetune.ms_enabled"] = true;
  v["finetune.temporal_enabled"] = true;

  v["detect.threshold"] = 0.5;
  v["detect.window_sec"] = 1.0;
  v["detect.split"] = "all";

  v["eval.thresholds"] = "0.05:0.5:0.05";
  v["eval.aggregate"] = "micro";
}

const json& Config::entry(const std::string& key) const {
  auto it = values_.find(key);
  GEBD_CHECK_CFG(it != values_.end(), "unknown config key: " + key);
  return *it;
}

void Config::set(const std::string& key, const json& value) {
  const json& cur = entry(key);
  json next = value;
  if (cur.is_string()) {
    GEBD_CHECK_CFG(next.is_string(), "config key " + key + " expects a string");
  } else if (cur.is_boolean()) {
    GEBD_CHECK_CFG(next.is_boolean(), "config key " + key + " expects a boolean");
  } else if (cur.is_number_integer()) {
    GEBD_CHECK_CFG(next.is_number_integer(), "config key " + key + " expects an integer");
  } else {
    GEBD_CHECK_CFG(next.is_number(), "config key " + key + " expects a number");
    next = next.get<double>();
  }
  values_[key] = next;
}

namespace {

json parse_typed_value(const json& current, const std::string& key, const std::string& text) {
  if (current.is_string()) return text;
  if (current.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(ErrorCode::config_error, "config key " + key + " expects true or false");
  }
  errno = 0;
  char* end = nullptr;
  if (current.is_number_integer()) {
    long long n = std::strtoll(text.c_str(), &end, 10);
    GEBD_CHECK_CFG(errno == 0 && end && *end == '\0' && !text.empty(),
                   "config key " + key + " expects an integer, got '" + text + "'");
    return static_cast<int64_t>(n);
  }
  double d = std::strtod(text.c_str(), &end);
  GEBD_CHECK_CFG(errno == 0 && end && *end == '\0' && !text.empty(),
                 "config key " + key + " expects a number, got '" + text + "'");
  return d;
}

}  // namespace

void Config::merge_override(const std::string& spec) {
  size_t eq = spec.find('=');
  GEBD_CHECK_CFG(eq != std::string::npos && eq > 0, "override must look like key=value: " + spec);
  std::string key = spec.substr(0, eq);
  std::string text = spec.substr(eq + 1);
  set(key, parse_typed_value(entry(key), key, text));
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  GEBD_CHECK_IO(in.good(), "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::config_error, "failed to parse " + path + ": " + e.what());
    }
    GEBD_CHECK_CFG(j.is_object(), "config file must hold a flat JSON object: " + path);
    for (auto it = j.begin(); it != j.end(); ++it) {
      GEBD_CHECK_CFG(!it.value().is_structured(),
                     "config value for " + it.key() + " must be a scalar");
      set(it.key(), it.value());
    }
    return;
  }
  std::istringstream lines(text);
  std::string line;
  int64_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    size_t stop = line.find_last_not_of(" \t\r");
    std::string item = line.substr(start, stop - start + 1);
    try {
      merge_override(item);
    } catch (const Error& e) {
      throw Error(e.code(),
                  path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

bool Config::get_bool(const std::string& key) const {
  const json& v = entry(key);
  GEBD_CHECK_CFG(v.is_boolean(), "config key " + key + " is not a boolean");
  return v.get<bool>();
}

int64_t Config::get_int(const std::string& key) const {
  const json& v = entry(key);
  GEBD_CHECK_CFG(v.is_number_integer(), "config key " + key + " is not an integer");
  return v.get<int64_t>();
}

double Config::get_double(const std::string& key) const {
  const json& v = entry(key);
  GEBD_CHECK_CFG(v.is_number(), "config key " + key + " is not a number");
  return v.get<double>();
}

std::string Config::get_string(const std::string& key) const {
  const json& v = entry(key);
  GEBD_CHECK_CFG(v.is_string(), "config key " + key + " is not a string");
  return v.get<std::string>();
}

void Config::finalize() {
  std::string variant = get_string("variant");
  GEBD_CHECK_CFG(variant == "tiny" || variant == "full", "variant must be tiny or full");
  GEBD_CHECK_CFG(get_int("seed") >= 0, "seed must be >= 0");
  GEBD_CHECK_CFG(get_int("workers") >= 1, "workers must be >= 1");
  std::string labels = get_string("finetune.labels");
  GEBD_CHECK_CFG(labels == "soft" || labels == "hard", "finetune.labels must be soft or hard");
  std::string agg = get_string("eval.aggregate");
  GEBD_CHECK_CFG(agg == "micro" || agg == "macro", "eval.aggregate must be micro or macro");
  std::string fmt = get_string("gen.format");
  GEBD_CHECK_CFG(fmt == "png" || fmt == "raw", "gen.format must be png or raw");
  std::string split = get_string("detect.split");
  GEBD_CHECK_CFG(split == "all" || split == "train" || split == "val",
                 "detect.split must be all, train, or val");
  if (get_int("finetune.hidden") == 0)
    values_["finetune.hidden"] = variant == "tiny" ? 64 : 512;
}

void Config::write_resolved(const std::string& path) const {
  write_json_file(path, values_);
}

enc::EncoderConfig encoder_config(const Config& c) {
  enc::EncoderConfig e =
      c.get_string("variant") == "tiny" ? enc::tiny_config() : enc::full_config();
  e.segments = static_cast<int>(c.get_int("pretrain.k"));
  return e;
}

pretext::PretrainConfig pretrain_config(const Config& c, int64_t steps_per_epoch) {
  GEBD_CHECK_ARG(steps_per_epoch >= 1, "pretrain: need at least one step per epoch");
  pretext::PretrainConfig p;
  p.encoder = encoder_config(c);
  p.augment.out_side = p.encoder.input_side;
  p.queue_capacity = c.get_int("pretrain.queue_size");
  p.temperature = c.get_double("pretrain.temperature");
  p.batch_size = c.get_int("pretrain.batch_size");
  p.clip_len = c.get_int("pretrain.clip_len");
  p.base_lr = c.get_double("pretrain.lr");
  p.sgd_momentum = c.get_double("pretrain.sgd_momentum");
  p.weight_decay = c.get_double("pretrain.weight_decay");
  p.warmup_steps = c.get_int("pretrain.warmup_epochs") * steps_per_epoch;
  p.total_steps = c.get_int("pretrain.epochs") * steps_per_epoch;
  p.key_momentum = c.get_double("pretrain.key_momentum");
  p.weight_intra = c.get_double("pretrain.weight_intra");
  p.weight_inter = c.get_double("pretrain.weight_inter");
  p.weight_segment = c.get_double("pretrain.weight_segment");
  p.weight_order = c.get_double("pretrain.weight_order");
  p.seed = derive_seed(c.seed(), "pretrain");
  p.validate();
  return p;
}

boundary::BoundaryConfig boundary_config(const Config& c) {
  boundary::BoundaryConfig b;
  b.encoder = encoder_config(c);
  b.window = c.get_int("finetune.window");
  b.dilation = c.get_int("finetune.dilation");
  b.candidate_stride = c.get_int("finetune.candidate_stride");
  b.include_candidate = c.get_bool("finetune.include_candidate");
  b.hidden = c.get_int("finetune.hidden");
  GEBD_CHECK_CFG(b.hidden >= 1, "finetune.hidden unresolved; call finalize() first");
  b.ms_enabled = c.get_bool("finetune.ms_enabled");
  b.temporal_enabled = c.get_bool("finetune.temporal_enabled");
  b.validate();
  return b;
}

boundary::FinetuneConfig finetune_config(const Config& c) {
  boundary::FinetuneConfig f;
  f.soft = c.get_string("finetune.labels") == "soft";
  f.sigma = c.get_double("finetune.sigma");
  f.batch_size = c.get_int("finetune.batch_size");
  f.base_lr = c.get_double("finetune.lr");
  f.sgd_momentum = c.get_double("finetune.sgd_momentum");
  f.weight_decay = c.get_double("finetune.weight_decay");
  f.max_epochs = c.get_int("finetune.epochs");
  f.patience = c.get_int("finetune.patience");
  f.max_steps_per_epoch = c.get_int("finetune.max_steps_per_epoch");
  f.val_threshold = c.get_double("finetune.val_threshold");
  f.freeze_encoder = c.get_bool("finetune.freeze_encoder");
  f.seed = c.seed();
  f.validate();
  return f;
}

data::GenSynthOptions gen_options(const Config& c) {
  data::GenSynthOptions g;
  g.count = c.get_int("gen.count");
  g.seed = c.seed();
  g.format = c.get_string("gen.format") == "png" ? data::FrameFormat::png : data::FrameFormat::raw;
  g.profile.length = c.get_int("gen.length");
  g.profile.height = c.get_int("gen.side");
  g.profile.width = c.get_int("gen.side");
  g.profile.fps = c.get_double("gen.fps");
  g.profile.min_events = static_cast<int>(c.get_int("gen.min_events"));
  g.profile.max_events = static_cast<int>(c.get_int("gen.max_events"));
  return g;
}

}  // namespace gebd::cfg
