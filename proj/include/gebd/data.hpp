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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gebd/common.hpp"
#include "gebd/eval.hpp"
#include "gebd/tensor.hpp"

namespace gebd::data {

// ---------------- domain types ----------------

struct VideoFrames {
  std::string video_id;
  int64_t t = 0, h = 0, w = 0;
  double fps = 0.0;
  std::vector<uint8_t> rgb;  // (T, 3, H, W) planar

  double duration_sec() const { return static_cast<double>(t) / fps; }
  uint8_t at(int64_t tt, int64_t c, int64_t y, int64_t x) const {
    return rgb[static_cast<size_t>(((tt * 3 + c) * h + y) * w + x)];
  }
};

enum class EventType { shot_cut, direction_change, color_change, speed_change };

// direction/speed changes alter the trajectory only; the boundary frame
// itself renders identically to the no-event timeline.
bool is_motion_only(EventType type);
const char* event_type_name(EventType type);
EventType event_type_from_name(const std::string& name);

struct SceneEvent {
  int64_t frame = 0;
  EventType type = EventType::shot_cut;
};

struct MovingObject {
  int shape = 0;  // 0 = rectangle, 1 = disc
  double cx = 0.0, cy = 0.0;
  double vx = 0.0, vy = 0.0;
  double half_w = 3.0, half_h = 3.0;  // rectangle half extents; disc uses half_w as radius
  std::array<double, 3> color{200.0, 200.0, 200.0};
};

struct SyntheticSceneSpec {
  std::string video_id;
  int64_t length = 120;
  int64_t height = 32, width = 32;
  double fps = 10.0;
  std::array<double, 3> background{18.0, 20.0, 24.0};
  std::vector<MovingObject> objects;
  std::vector<SceneEvent> events;
  uint64_t seed = 0;
};

struct GeneratedVideo {
  VideoFrames frames;
  eval::AnnotationSet annotation;       // single annotator: event_frame / fps
  std::vector<bool> motion_only;        // parallel to spec.events
};

// Deterministic render: identical spec (seed included) gives identical
// pixels. Arithmetic in the render path avoids libm so pixel values agree
// across platforms.
GeneratedVideo generate_synthetic_video(const SyntheticSceneSpec& spec);

// Renders the same scene with events after `upto_frame` dropped; used to
// verify that motion-only boundaries keep the boundary frame identical.
GeneratedVideo generate_without_events_after(const SyntheticSceneSpec& spec, int64_t upto_frame);

struct SceneProfile {
  int64_t length = 120;
  int64_t height = 32, width = 32;
  double fps = 10.0;
  int min_events = 2, max_events = 4;
  bool pure_motion = false;  // all events motion-only
};

SyntheticSceneSpec random_scene_spec(const std::string& video_id, uint64_t seed,
                                     const SceneProfile& profile);

// ---------------- storage ----------------

enum class FrameFormat { png, raw };

void save_video_frames(const std::string& dir, const VideoFrames& frames, FrameFormat format);
VideoFrames load_video_frames(const std::string& dir);

// ---------------- corpus ----------------

struct ManifestEntry {
  std::string video_id;
  std::string frames_path;  // relative to the manifest's directory
  double fps = 0.0;
  int64_t num_frames = 0;
  std::string split;                       // "train" | "val"
  std::vector<std::string> boundary_tags;  // "motion" | "appearance" per event
};

struct CorpusManifest {
  std::string root;  // directory containing manifest.json
  std::vector<ManifestEntry> entries;
};

void save_manifest(const std::string& dir, const CorpusManifest& manifest);
// Validates existence of every referenced video directory before returning.
CorpusManifest load_manifest(const std::string& path);

struct GenSynthOptions {
  int64_t count = 80;
  uint64_t seed = 0;
  FrameFormat format = FrameFormat::png;
  SceneProfile profile;  // length/fps/size defaults
};

// Writes per-video frame dirs + manifest.json + annotations.json under
// out_dir. Roughly 4/5 train, 1/5 val; half of the val split is generated
// with motion-only events exclusively.
CorpusManifest generate_corpus(const std::string& out_dir, const GenSynthOptions& options);

// (3,H,W) double in [-0.5, 0.5]: v/255 - 0.5.
Tensor to_model_input(const VideoFrames& frames, int64_t t);

}  // namespace gebd::data
