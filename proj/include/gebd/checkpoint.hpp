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
#include <utility>
#include <vector>

#include <json.hpp>

#include "gebd/encoder.hpp"
#include "gebd/nn.hpp"
#include "gebd/tensor.hpp"

namespace gebd::ckpt {

// On-disk layout:
//   bytes  0..16   magic "GEBD-SSL-CKPT-v1" and a newline
//   bytes 17..24   u64 little-endian header byte length H
//   bytes 25..25+H JSON header {"version", "meta", "tensors":
//                  [{"name", "shape", "offset"}, ...]} with offset counted
//                  in float64 elements into the payload
//   rest           payload, float64 little-endian, tensors in header order
//
// Tensor name conventions written by the trainers:
//   query.<param>, key.<param>      encoder tower parameters
//   cls.<param>                     boundary classifier parameters
//   opt.velocity.<param>            optimizer momentum buffers
// Meta fields: "config" (encoder config), "momentum", "optimizer": {"step"},
// plus free-form run counters.
inline constexpr char kCheckpointMagic[] = "GEBD-SSL-CKPT-v1";

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;  // ordered, unique names

  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json encoder_config_to_json(const enc::EncoderConfig& c);
enc::EncoderConfig encoder_config_from_json(const nlohmann::json& j);

// Copies every parameter of the store into the checkpoint as
// "<prefix>.<name>".
void put_store(Checkpoint& c, const std::string& prefix, const nn::ParamStore& store);

// Copies checkpoint values back into an existing store. Every store
// parameter must be present under the prefix with a matching shape.
void read_store(const Checkpoint& c, const std::string& prefix, const nn::ParamStore& store);

void put_optimizer(Checkpoint& c, const nn::SgdOptimizer& opt);
void read_optimizer(const Checkpoint& c, nn::SgdOptimizer& opt);

// Snapshot of both towers plus the encoder config and momentum coefficient.
Checkpoint make_encoder_checkpoint(const enc::DualEncoder& dual);

// Restores tower parameters and momentum into a structurally matching
// encoder; the stored config must equal dual.config().
void restore_encoder(const Checkpoint& c, enc::DualEncoder& dual);

}  // namespace gebd::ckpt
