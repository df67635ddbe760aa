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

#include "gebd/encoder.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gebd/common.hpp"

namespace gebd::enc {
namespace {

// Per-stage stride of the first block. The full variant keeps stage 1 at
// the stem resolution; the tiny variant halves at every stage.
int stage_stride(Variant variant, size_t stage_index) {
  if (variant == Variant::full) return stage_index == 0 ? 1 : 2;
  return 2;
}

// Total downsampling factor from input to the last stage output.
int total_downsample(Variant variant) { return variant == Variant::full ? 32 : 16; }

detail::BlockParams make_block(nn::ParamStore& ps, const std::string& prefix, int64_t cin,
                               int64_t cout, int stride, bool bottleneck, Rng& rng) {
  detail::BlockParams bp;
  bp.bottleneck = bottleneck;
  bp.in_channels = cin;
  if (bottleneck) {
    int64_t mid = cout / 4;
    bp.conv1 = nn::make_conv2d(ps, prefix + ".conv1", cin, mid, 1, 1, 0, false, rng);
    bp.norm1 = nn::make_group_norm(ps, prefix + ".norm1", mid);
    bp.conv2 = nn::make_conv2d(ps, prefix + ".conv2", mid, mid, 3, stride, 1, false, rng);
    bp.norm2 = nn::make_group_norm(ps, prefix + ".norm2", mid);
    bp.conv3 = nn::make_conv2d(ps, prefix + ".conv3", mid, cout, 1, 1, 0, false, rng);
    bp.norm3 = nn::make_group_norm(ps, prefix + ".norm3", cout);
  } else {
    bp.conv1 = nn::make_conv2d(ps, prefix + ".conv1", cin, cout, 3, stride, 1, false, rng);
    bp.norm1 = nn::make_group_norm(ps, prefix + ".norm1", cout);
    bp.conv2 = nn::make_conv2d(ps, prefix + ".conv2", cout, cout, 3, 1, 1, false, rng);
    bp.norm2 = nn::make_group_norm(ps, prefix + ".norm2", cout);
  }
  if (stride != 1 || cin != cout) {
    bp.has_proj = true;
    bp.proj = nn::make_conv2d(ps, prefix + ".proj", cin, cout, 1, stride, 0, false, rng);
    bp.proj_norm = nn::make_group_norm(ps, prefix + ".proj_norm", cout);
  }
  return bp;
}

detail::HeadParams make_head(nn::ParamStore& ps, const std::string& prefix, int64_t din,
                             int64_t hidden, int64_t dout, Rng& rng) {
  detail::HeadParams h;
  h.fc1 = nn::make_linear(ps, prefix + ".fc1", din, hidden, true, rng);
  h.fc2 = nn::make_linear(ps, prefix + ".fc2", hidden, dout, true, rng);
  return h;
}

Var run_head(const detail::HeadParams& h, const Var& x) {
  Var y = ag::reshape(x, {1, x.numel()});
  y = h.fc2(ag::relu(h.fc1(y)));
  return ag::normalize_l2(ag::reshape(y, {y.numel()}));
}

void check_shiftable(double fraction, int64_t channels, const std::string& what) {
  double doubled = 2.0 * fraction * static_cast<double>(channels);
  GEBD_CHECK_CFG(std::fabs(doubled - std::round(doubled)) < 1e-9,
                 "shift fraction " + std::to_string(fraction) + " does not split " + what +
                     " (" + std::to_string(channels) + " channels) into whole channel groups");
}

}  // namespace

void EncoderConfig::validate() const {
  GEBD_CHECK_CFG(channels_per_stage.size() == 4, "encoder needs exactly 4 residual stages");
  GEBD_CHECK_CFG(blocks_per_stage.size() == channels_per_stage.size(),
                 "blocks_per_stage and channels_per_stage lengths differ");
  GEBD_CHECK_CFG(stem_channels >= 1, "stem width must be positive");
  for (size_t i = 0; i < channels_per_stage.size(); ++i) {
    GEBD_CHECK_CFG(channels_per_stage[i] >= 1, "stage width must be positive");
    GEBD_CHECK_CFG(blocks_per_stage[i] >= 1, "every stage needs at least one block");
  }
  GEBD_CHECK_CFG(ms_after_stage >= 1 && ms_after_stage <= 4,
                 "motion fusion stage index out of range");
  GEBD_CHECK_CFG(channels_per_stage[ms_after_stage - 1] % 4 == 0,
                 "motion fusion stage width must be divisible by 4");
  GEBD_CHECK_CFG(tsm_shift_fraction > 0.0 && tsm_shift_fraction < 0.5,
                 "shift fraction must lie in (0, 0.5)");
  check_shiftable(tsm_shift_fraction, stem_channels, "the stem output");
  for (int64_t c : channels_per_stage) check_shiftable(tsm_shift_fraction, c, "a stage output");
  GEBD_CHECK_CFG(feature_dim == channels_per_stage.back(),
                 "feature width must equal the last stage width");
  GEBD_CHECK_CFG(embedding_dim >= 1, "embedding width must be positive");
  GEBD_CHECK_CFG(segments >= 2, "order head needs at least 2 segments");
  GEBD_CHECK_CFG(ms.l >= 1, "displacement radius must be positive");
  GEBD_CHECK_CFG(input_side >= 2 * total_downsample(variant),
                 "input side too small for the stage ladder");
  if (variant == Variant::full) {
    GEBD_CHECK_CFG(input_side == 224 && stem_channels == 64 &&
                       channels_per_stage == std::vector<int64_t>({256, 512, 1024, 2048}) &&
                       blocks_per_stage == std::vector<int>({3, 4, 6, 3}) &&
                       ms_after_stage == 2,
                   "full variant stage layout is fixed");
  }
}

EncoderConfig tiny_config() {
  EncoderConfig c;
  c.variant = Variant::tiny;
  c.input_side = 32;
  c.stem_channels = 16;
  c.channels_per_stage = {16, 32, 64, 128};
  c.blocks_per_stage = {1, 1, 1, 1};
  c.ms_after_stage = 3;
  c.feature_dim = 128;
  c.embedding_dim = 32;
  c.ms.l = 3;
  return c;
}

EncoderConfig full_config() {
  EncoderConfig c;
  c.variant = Variant::full;
  c.input_side = 224;
  c.stem_channels = 64;
  c.channels_per_stage = {256, 512, 1024, 2048};
  c.blocks_per_stage = {3, 4, 6, 3};
  c.ms_after_stage = 2;
  c.feature_dim = 2048;
  c.embedding_dim = 128;
  c.ms.l = 7;
  return c;
}

int64_t tsm_shift_channels(int64_t channels, double fraction) {
  return static_cast<int64_t>(std::floor(fraction * static_cast<double>(channels)));
}

Var temporal_shift(const Var& x, double fraction) {
  GEBD_CHECK_ARG(x.shape().size() == 4, "temporal_shift expects (T,C,H,W)");
  GEBD_CHECK_ARG(fraction > 0.0 && fraction < 0.5, "shift fraction must lie in (0, 0.5)");
  return ag::temporal_shift(x, tsm_shift_channels(x.shape()[1], fraction));
}

Encoder::Encoder(const EncoderConfig& config, nn::ParamStore& params, Rng& rng)
    : config_(config) {
  config_.validate();
  bool bottleneck = config_.variant == Variant::full;
  if (bottleneck) {
    stem_conv_ = nn::make_conv2d(params, "stem.conv", 3, config_.stem_channels, 7, 2, 3, false, rng);
  } else {
    stem_conv_ = nn::make_conv2d(params, "stem.conv", 3, config_.stem_channels, 3, 1, 1, false, rng);
  }
  stem_norm_ = nn::make_group_norm(params, "stem.norm", config_.stem_channels);

  int64_t cin = config_.stem_channels;
  for (size_t s = 0; s < config_.channels_per_stage.size(); ++s) {
    int64_t cout = config_.channels_per_stage[s];
    std::vector<detail::BlockParams> blocks;
    for (int b = 0; b < config_.blocks_per_stage[s]; ++b) {
      int stride = b == 0 ? stage_stride(config_.variant, s) : 1;
      std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
      blocks.push_back(make_block(params, prefix, cin, cout, stride, bottleneck, rng));
      cin = cout;
    }
    stages_.push_back(std::move(blocks));
  }

  ms_transform_ = motion::make_motion_transform(
      params, "ms", config_.channels_per_stage[config_.ms_after_stage - 1], rng);

  int64_t f = config_.feature_dim;
  int64_t e = config_.embedding_dim;
  head_intra_ = make_head(params, "head.intra", f, f, e, rng);
  head_inter_ = make_head(params, "head.inter", f, f, e, rng);
  head_segment_ = make_head(params, "head.segment", f, f, e, rng);
  head_order_ = make_head(params, "head.order", config_.segments * f, f, e, rng);
}

Var Encoder::run_block(const detail::BlockParams& block, const Var& x, bool shift) const {
  Var y = x;
  if (shift) {
    int64_t n = tsm_shift_channels(block.in_channels, config_.tsm_shift_fraction);
    if (n > 0) y = ag::temporal_shift(y, n);
  }
  if (block.bottleneck) {
    y = ag::relu(block.norm1(block.conv1(y)));
    y = ag::relu(block.norm2(block.conv2(y)));
    y = block.norm3(block.conv3(y));
  } else {
    y = ag::relu(block.norm1(block.conv1(y)));
    y = block.norm2(block.conv2(y));
  }
  Var skip = block.has_proj ? block.proj_norm(block.proj(x)) : x;
  return ag::relu(ag::add(y, skip));
}

EncodeResult Encoder::encode(const Var& frames, const EncodeOptions& options) const {
  const Shape& sh = frames.shape();
  GEBD_CHECK_ARG(sh.size() == 4 && sh[1] == 3 && sh[2] == config_.input_side &&
                     sh[3] == config_.input_side,
                 "encode expects (T,3," + std::to_string(config_.input_side) + "," +
                     std::to_string(config_.input_side) + ") frames");
  int64_t t = sh[0];
  GEBD_CHECK_ARG(t >= 1, "encode needs at least one frame");
  bool temporal = options.temporal_enabled;
  GEBD_CHECK_ARG(!temporal || t >= 2, "temporal modules need at least 2 frames");

  EncodeResult out;
  Var x = ag::relu(stem_norm_(stem_conv_(frames)));
  if (config_.variant == Variant::full) x = ag::maxpool2d(x, 3, 2, 1);
  for (size_t s = 0; s < stages_.size(); ++s) {
    for (const auto& block : stages_[s]) x = run_block(block, x, temporal);
    if (static_cast<int>(s) + 1 == config_.ms_after_stage) {
      if (options.want_confidence && t >= 2)
        out.confidence = motion::clip_confidence_maps(x.val(), config_.ms);
      if (temporal && options.ms_enabled) x = motion::motion_squeeze(x, ms_transform_, config_.ms);
      if (options.want_stage_maps) out.stage_maps = x;
    }
  }
  out.pooled = ag::global_avg_pool(x);
  return out;
}

Var Encoder::project(const Var& feature, HeadKind head) const {
  GEBD_CHECK_ARG(feature.shape().size() == 1 && feature.numel() == config_.feature_dim,
                 "project expects a (feature_dim) vector");
  GEBD_CHECK_ARG(feature.val().norm2() > 1e-12, "project rejects a zero feature vector");
  switch (head) {
    case HeadKind::intra:
      return run_head(head_intra_, feature);
    case HeadKind::inter:
      return run_head(head_inter_, feature);
    case HeadKind::segment:
      return run_head(head_segment_, feature);
  }
  GEBD_CHECK_ARG(false, "unknown projection head");
  return Var();
}

Var Encoder::project_order(const Var& features) const {
  GEBD_CHECK_ARG(features.shape().size() == 1 &&
                     features.numel() == config_.segments * config_.feature_dim,
                 "project_order expects a (segments*feature_dim) vector");
  GEBD_CHECK_ARG(features.val().norm2() > 1e-12, "project_order rejects a zero feature vector");
  return run_head(head_order_, features);
}

DualEncoder::DualEncoder(const EncoderConfig& config, uint64_t seed, double momentum)
    : config_(config), momentum_(momentum) {
  GEBD_CHECK_ARG(momentum >= 0.0 && momentum <= 1.0, "momentum must lie in [0,1]");
  Rng query_rng(derive_seed(seed, "encoder"));
  query_enc_ = std::make_unique<Encoder>(config_, query_params_, query_rng);
  Rng key_rng(derive_seed(seed, "encoder"));
  key_enc_ = std::make_unique<Encoder>(config_, key_params_, key_rng);
  // Same creation path and seed already match the towers; the copy pins it.
  nn::ParamStore::copy_values(key_params_, query_params_);
  key_params_.set_requires_grad(false);
}

void DualEncoder::set_momentum(double m) {
  GEBD_CHECK_ARG(m >= 0.0 && m <= 1.0, "momentum must lie in [0,1]");
  momentum_ = m;
}

void DualEncoder::momentum_update() {
  nn::ParamStore::momentum_update(key_params_, query_params_, momentum_);
}

}  // namespace gebd::enc
