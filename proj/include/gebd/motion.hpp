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

#include "gebd/nn.hpp"

namespace gebd::motion {

using ag::Var;

struct MotionSqueezeConfig {
  int l = 7;  // displacement radius; neighborhood side P = 2l+1
  double softmax_temperature = 0.01;
  double kernel_sigma = 5.0;
};

// Four depthwise-separable blocks (depthwise 3x3, pointwise 1x1, norm,
// rectifier) mapping the 3-channel displacement+confidence stack to C
// channels along 3 -> C/4 -> C/4 -> C/2 -> C.
struct MotionTransform {
  int64_t channels = 0;
  nn::DepthwiseConv2d dw[4];
  nn::Conv2d pw[4];
  nn::GroupNorm norm[4];

  // x: (N,3,H,W) -> (N,C,H,W)
  Var operator()(const Var& x) const;
};

MotionTransform make_motion_transform(nn::ParamStore& ps, const std::string& prefix,
                                      int64_t channels, Rng& rng);

// Displacement (2,H,W) and confidence (1,H,W) stacked to (3,H,W) for one
// adjacent feature-map pair.
Var displacement_confidence(const Var& f0, const Var& f1, const MotionSqueezeConfig& config);

// clip: (T,C,H,W), T >= 2. Motion features come from adjacent pairs; the
// last frame reuses the previous pair's motion feature. Output F' = F + M.
Var motion_squeeze(const Var& clip, const MotionTransform& transform,
                   const MotionSqueezeConfig& config);

// Value-level confidence maps for visualization: one (H,W) tensor per frame
// pair, index t built from frames (t, t+1).
std::vector<Tensor> clip_confidence_maps(const Tensor& clip, const MotionSqueezeConfig& config);

}  // namespace gebd::motion
