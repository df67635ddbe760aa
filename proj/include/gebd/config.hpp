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

#include <cstdint>
#include <string>

#include <json.hpp>

#include "gebd/boundary.hpp"
#include "gebd/data.hpp"
#include "gebd/encoder.hpp"
#include "gebd/pretext.hpp"

namespace gebd::cfg {

// Flat dotted-key run configuration. The default table defines the complete
// key set and the type of every value; files and overrides can only re-set
// known keys, so a typo fails loudly instead of drifting a run. Resolution
// order: defaults, then the config file, then --set overrides, then
// finalize(), which materializes derived defaults.
class Config {
 public:
  Config();  // desk defaults, tiny variant

  // Flat JSON object ({"pretrain.lr": 0.01, ...}) or key=value lines with '#'
  // comments; the format is sniffed from the first non-space byte.
  void merge_file(const std::string& path);

  // "key=value"; the value is parsed according to the key's declared type.
  void merge_override(const std::string& spec);

  void set(const std::string& key, const nlohmann::json& value);

  bool get_bool(const std::string& key) const;
  int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  uint64_t seed() const { return static_cast<uint64_t>(get_int("seed")); }
  int64_t workers() const { return get_int("workers"); }

  // Fills derived defaults (classifier width 0 becomes 64 tiny / 512 full)
  // and validates enumerated values. Idempotent; called by every command.
  void finalize();

  // Keys sorted, so equal configurations serialize byte-identically.
  const nlohmann::json& values() const { return values_; }
  void write_resolved(const std::string& path) const;

 private:
  const nlohmann::json& entry(const std::string& key) const;
  nlohmann::json values_;
};

enc::EncoderConfig encoder_config(const Config& c);

// Pretraining schedule lengths depend on the corpus, so the per-epoch step
// count is supplied by the caller.
pretext::PretrainConfig pretrain_config(const Config& c, int64_t steps_per_epoch);

boundary::BoundaryConfig boundary_config(const Config& c);
boundary::FinetuneConfig finetune_config(const Config& c);
data::GenSynthOptions gen_options(const Config& c);

}  // namespace gebd::cfg
