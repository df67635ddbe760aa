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

#include "gebd/motion.hpp"

namespace gebd::motion {

Var MotionTransform::operator()(const Var& x) const {
  GEBD_CHECK_ARG(x.shape().size() == 4 && x.shape()[1] == 3,
                 "motion transform: input must be (N,3,H,W)");
  Var h = x;
  for (int b = 0; b < 4; ++b) h = ag::relu(norm[b](pw[b](dw[b](h))));
  return h;
}

MotionTransform make_motion_transform(nn::ParamStore& ps, const std::string& prefix,
                                      int64_t channels, Rng& rng) {
  if (channels % 4 != 0)
    throw Error(ErrorCode::config_error,
                "motion transform: channel count must be divisible by 4, got " +
                    std::to_string(channels));
  MotionTransform t;
  t.channels = channels;
  const int64_t chain[5] = {3, channels / 4, channels / 4, channels / 2, channels};
  for (int b = 0; b < 4; ++b) {
    std::string block = prefix + ".block" + std::to_string(b);
    t.dw[b] = nn::make_depthwise_conv2d(ps, block + ".dw", chain[b], 3, 1, 1, true, rng);
    t.pw[b] = nn::make_conv2d(ps, block + ".pw", chain[b], chain[b + 1], 1, 1, 0, true, rng);
    t.norm[b] = nn::make_group_norm(ps, block + ".norm", chain[b + 1]);
  }
  return t;
}

Var displacement_confidence(const Var& f0, const Var& f1, const MotionSqueezeConfig& config) {
  Var vol = ag::correlation_volume(f0, f1, config.l);
  Var disp = ag::kernel_soft_argmax(vol, config.softmax_temperature, config.kernel_sigma);
  Var conf = ag::confidence_map(vol);
  return ag::concat0({disp, conf});  // (3,H,W)
}

namespace {

Var slice_frame(const Var& clip, int64_t t) {
  const Shape& s = clip.shape();
  Var flat = ag::reshape(clip, {s[0], s[1] * s[2] * s[3]});
  return ag::reshape(ag::row(flat, t), {s[1], s[2], s[3]});
}

}  // namespace

Var motion_squeeze(const Var& clip, const MotionTransform& transform,
                   const MotionSqueezeConfig& config) {
  GEBD_CHECK_ARG(clip.shape().size() == 4, "motion_squeeze: clip must be (T,C,H,W)");
  const int64_t t = clip.shape()[0], c = clip.shape()[1];
  GEBD_CHECK_ARG(t >= 2, "motion_squeeze: needs at least two frames");
  GEBD_CHECK_ARG(c == transform.channels, "motion_squeeze: channel count mismatch");

  std::vector<Var> motions;
  motions.reserve(static_cast<size_t>(t));
  for (int64_t i = 0; i + 1 < t; ++i) {
    Var dc = displacement_confidence(slice_frame(clip, i), slice_frame(clip, i + 1), config);
    Var m = transform(ag::reshape(dc, {1, 3, clip.shape()[2], clip.shape()[3]}));
    motions.push_back(m);
  }
  motions.push_back(motions.back());  // last frame reuses the previous motion
  return ag::add(clip, ag::concat0(motions));
}

std::vector<Tensor> clip_confidence_maps(const Tensor& clip, const MotionSqueezeConfig& config) {
  GEBD_CHECK_ARG(clip.shape().size() == 4 && clip.shape()[0] >= 2,
                 "clip_confidence_maps: clip must be (T>=2,C,H,W)");
  const int64_t t = clip.shape()[0], c = clip.shape()[1], h = clip.shape()[2], w = clip.shape()[3];
  std::vector<Tensor> out;
  for (int64_t i = 0; i + 1 < t; ++i) {
    Tensor f0({c, h, w}), f1({c, h, w});
    for (int64_t k = 0; k < c * h * w; ++k) {
      f0[k] = clip[i * c * h * w + k];
      f1[k] = clip[(i + 1) * c * h * w + k];
    }
    Var conf = ag::confidence_map(
        ag::correlation_volume(Var::constant(f0), Var::constant(f1), config.l));
    out.push_back(conf.val().reshaped({h, w}));
  }
  return out;
}

}  // namespace gebd::motion
