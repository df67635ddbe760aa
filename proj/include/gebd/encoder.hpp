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

#include "gebd/autograd.hpp"
#include "gebd/motion.hpp"
#include "gebd/nn.hpp"

namespace gebd::enc {

using ag::Var;

enum class Variant { full, tiny };

// Residual video encoder with a channel time-shift at the head of every
// residual block and a motion fusion module after one configured stage.
// The full variant is a bottleneck network (stages of 3/4/6/3 blocks,
// stage widths 256/512/1024/2048, 224x224 input, fusion after stage 2 at
// 28x28/512ch). The tiny variant keeps the same topology at desk scale:
// one basic block per stage, widths 16/32/64/128, 32x32 input, fusion
// after stage 3 at 4x4/64ch.
struct EncoderConfig {
  Variant variant = Variant::tiny;
  int input_side = 32;
  int64_t stem_channels = 16;
  std::vector<int64_t> channels_per_stage = {16, 32, 64, 128};
  std::vector<int> blocks_per_stage = {1, 1, 1, 1};
  // 1-based residual stage index; motion fusion runs on that stage's output.
  int ms_after_stage = 3;
  double tsm_shift_fraction = 0.125;  // per direction
  bool temporal_modules_enabled_default = true;
  int64_t feature_dim = 128;    // pooled backbone width, = channels_per_stage.back()
  int64_t embedding_dim = 32;   // projection head output width
  int segments = 3;             // K; the order head consumes K pooled features
  motion::MotionSqueezeConfig ms;

  // Throws Error(config_error) on violated structural invariants.
  void validate() const;
};

EncoderConfig tiny_config();
EncoderConfig full_config();

// Per-direction shifted channel count for a given width.
int64_t tsm_shift_channels(int64_t channels, double fraction);

// Channel time-shift over (T,C,H,W) by fraction per direction: the first
// group takes values from t-1 (t=0 zero), the second from t+1 (last zero),
// the rest pass through.
Var temporal_shift(const Var& x, double fraction);

enum class HeadKind { intra, inter, segment };

struct EncodeOptions {
  bool temporal_enabled = true;  // time shift + motion fusion; off treats frames alone
  bool ms_enabled = true;        // motion fusion toggle within the temporal path
  bool want_stage_maps = false;  // keep the fusion-stage feature maps
  bool want_confidence = false;  // value-level correlation confidence per frame pair
};

struct EncodeResult {
  Var pooled;      // (T, feature_dim)
  Var stage_maps;  // (T, C, H, W) fusion-stage output, defined when requested
  std::vector<Tensor> confidence;  // one (H, W) map per adjacent frame pair
};

namespace detail {

struct BlockParams {
  nn::Conv2d conv1, conv2, conv3;  // conv3 used by bottleneck blocks only
  nn::GroupNorm norm1, norm2, norm3;
  nn::Conv2d proj;
  nn::GroupNorm proj_norm;
  bool has_proj = false;
  bool bottleneck = false;
  int64_t in_channels = 0;
};

struct HeadParams {
  nn::Linear fc1, fc2;
};

}  // namespace detail

// One encoder tower: stem, four residual stages, motion fusion, pooling,
// and the projection heads. Parameters are registered into the caller's
// store; forward passes are pure functions of (params, input).
class Encoder {
 public:
  Encoder(const EncoderConfig& config, nn::ParamStore& params, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  // frames: (T, 3, S, S) with S = config.input_side; T >= 2 when temporal
  // modules are enabled. Each frame maps to one pooled feature row.
  EncodeResult encode(const Var& frames, const EncodeOptions& options) const;

  // feature: (feature_dim) -> unit-norm (embedding_dim). Throws on a
  // zero feature vector; its direction after the head would be arbitrary.
  Var project(const Var& feature, HeadKind head) const;

  // features: (segments * feature_dim), slot order intact -> unit-norm
  // (embedding_dim). Order-sensitive by construction.
  Var project_order(const Var& features) const;

 private:
  Var run_block(const detail::BlockParams& block, const Var& x, bool shift) const;

  EncoderConfig config_;
  nn::Conv2d stem_conv_;
  nn::GroupNorm stem_norm_;
  std::vector<std::vector<detail::BlockParams>> stages_;
  motion::MotionTransform ms_transform_;
  detail::HeadParams head_intra_, head_inter_, head_segment_, head_order_;
};

// Query and key towers over identical parameter structure. The key tower
// never carries gradients and moves only through momentum_update.
class DualEncoder {
 public:
  DualEncoder(const EncoderConfig& config, uint64_t seed, double momentum);

  const EncoderConfig& config() const { return config_; }
  double momentum() const { return momentum_; }
  void set_momentum(double m);

  Encoder& query() { return *query_enc_; }
  const Encoder& query() const { return *query_enc_; }
  Encoder& key() { return *key_enc_; }
  const Encoder& key() const { return *key_enc_; }

  nn::ParamStore& query_params() { return query_params_; }
  const nn::ParamStore& query_params() const { return query_params_; }
  nn::ParamStore& key_params() { return key_params_; }
  const nn::ParamStore& key_params() const { return key_params_; }

  // key <- m*key + (1-m)*query, elementwise over every parameter.
  void momentum_update();

 private:
  EncoderConfig config_;
  double momentum_;
  nn::ParamStore query_params_, key_params_;
  std::unique_ptr<Encoder> query_enc_, key_enc_;
};

}  // namespace gebd::enc
