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

#include "gebd/data.hpp"

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace gebd::data {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_motion_only(EventType type) {
  return type == EventType::direction_change || type == EventType::speed_change;
}

const char* event_type_name(EventType type) {
  switch (type) {
    case EventType::shot_cut: return "shot_cut";
    case EventType::direction_change: return "direction_change";
    case EventType::color_change: return "color_change";
    case EventType::speed_change: return "speed_change";
  }
  return "unknown";
}

EventType event_type_from_name(const std::string& name) {
  if (name == "shot_cut") return EventType::shot_cut;
  if (name == "direction_change") return EventType::direction_change;
  if (name == "color_change") return EventType::color_change;
  if (name == "speed_change") return EventType::speed_change;
  throw Error(ErrorCode::invalid_argument, "unknown event type: " + name);
}

// ---------------- renderer ----------------

namespace {

constexpr int kSubsamples = 4;  // 4x4 coverage grid per pixel

// bright, saturated palette against the dark background
constexpr std::array<std::array<double, 3>, 6> kPalette{{{235.0, 64.0, 52.0},
                                                         {52.0, 122.0, 235.0},
                                                         {60.0, 220.0, 90.0},
                                                         {240.0, 200.0, 60.0},
                                                         {220.0, 70.0, 220.0},
                                                         {70.0, 225.0, 225.0}}};

int palette_index(const std::array<double, 3>& color) {
  for (size_t i = 0; i < kPalette.size(); ++i)
    if (kPalette[i] == color) return static_cast<int>(i);
  return -1;
}

// minimal wrapped delta on a ring of size `extent`; inputs lie in (-extent,
// extent) because positions are kept wrapped into [0, extent)
inline double wrapped_delta(double d, double extent) {
  if (d > extent * 0.5) return d - extent;
  if (d < -extent * 0.5) return d + extent;
  return d;
}

struct SceneState {
  std::array<double, 3> background;
  std::vector<MovingObject> objects;
};

void render_frame(const SceneState& state, int64_t h, int64_t w, uint8_t* out /* (3,H,W) */) {
  const double inv_sub = 1.0 / static_cast<double>(kSubsamples);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      double r = state.background[0], g = state.background[1], b = state.background[2];
      for (const auto& obj : state.objects) {
        int inside = 0;
        for (int sy = 0; sy < kSubsamples; ++sy)
          for (int sx = 0; sx < kSubsamples; ++sx) {
            double py = static_cast<double>(y) + (static_cast<double>(sy) + 0.5) * inv_sub;
            double px = static_cast<double>(x) + (static_cast<double>(sx) + 0.5) * inv_sub;
            double dy = wrapped_delta(py - obj.cy, static_cast<double>(h));
            double dx = wrapped_delta(px - obj.cx, static_cast<double>(w));
            bool in = false;
            if (obj.shape == 0) {
              in = dx >= -obj.half_w && dx <= obj.half_w && dy >= -obj.half_h && dy <= obj.half_h;
            } else {
              in = dx * dx + dy * dy <= obj.half_w * obj.half_w;
            }
            if (in) ++inside;
          }
        if (inside == 0) continue;
        double cov = static_cast<double>(inside) * inv_sub * inv_sub;
        r = r * (1.0 - cov) + obj.color[0] * cov;
        g = g * (1.0 - cov) + obj.color[1] * cov;
        b = b * (1.0 - cov) + obj.color[2] * cov;
      }
      auto q = [](double v) {
        double rv = v + 0.5;
        if (rv < 0.0) rv = 0.0;
        if (rv > 255.0) rv = 255.0;
        return static_cast<uint8_t>(rv);
      };
      out[(0 * h + y) * w + x] = q(r);
      out[(1 * h + y) * w + x] = q(g);
      out[(2 * h + y) * w + x] = q(b);
    }
}

void step_positions(SceneState& state, double h, double w) {
  for (auto& obj : state.objects) {
    obj.cx += obj.vx;
    obj.cy += obj.vy;
    if (obj.cx < 0.0) obj.cx += w;
    if (obj.cx >= w) obj.cx -= w;
    if (obj.cy < 0.0) obj.cy += h;
    if (obj.cy >= h) obj.cy -= h;
  }
}

MovingObject random_object(Rng& rng, double h, double w) {
  MovingObject obj;
  obj.shape = rng.bernoulli(0.5) ? 1 : 0;
  obj.cx = rng.uniform(0.0, w);
  obj.cy = rng.uniform(0.0, h);
  obj.vx = rng.uniform(0.45, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  obj.vy = rng.uniform(0.45, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  double size = rng.uniform(3.5, 6.0);
  obj.half_w = size;
  obj.half_h = obj.shape == 0 ? rng.uniform(3.5, 6.0) : size;
  obj.color = kPalette[rng.uniform_int(kPalette.size())];
  return obj;
}

std::array<double, 3> random_background(Rng& rng) {
  return {rng.uniform(8.0, 40.0), rng.uniform(8.0, 40.0), rng.uniform(8.0, 40.0)};
}

void apply_event(SceneState& state, const SceneEvent& ev, Rng& scene_rng, double h, double w) {
  switch (ev.type) {
    case EventType::shot_cut: {
      Rng cut = scene_rng.fork("shot_cut:" + std::to_string(ev.frame));
      state.background = random_background(cut);
      size_t n = state.objects.size();
      state.objects.clear();
      for (size_t i = 0; i < n; ++i) state.objects.push_back(random_object(cut, h, w));
      break;
    }
    case EventType::color_change: {
      for (auto& obj : state.objects) {
        int idx = palette_index(obj.color);
        // hop three palette slots so the change is unmistakable
        obj.color = kPalette[static_cast<size_t>((idx < 0 ? 0 : idx) + 3) % kPalette.size()];
      }
      break;
    }
    case EventType::direction_change: {
      for (auto& obj : state.objects) {
        double vx = obj.vx, vy = obj.vy;
        obj.vx = -vy;  // exact quarter-turn keeps speed, changes heading
        obj.vy = vx;
      }
      break;
    }
    case EventType::speed_change: {
      for (auto& obj : state.objects) {
        double speed2 = obj.vx * obj.vx + obj.vy * obj.vy;
        double k = speed2 > 1.3 ? 0.4 : 2.5;
        obj.vx *= k;
        obj.vy *= k;
      }
      break;
    }
  }
}

void validate_spec(const SyntheticSceneSpec& spec) {
  GEBD_CHECK_ARG(spec.length >= 1, "scene spec: length must be >= 1");
  GEBD_CHECK_ARG(spec.fps > 0.0, "scene spec: fps must be positive");
  GEBD_CHECK_ARG(spec.height >= 8 && spec.width >= 8, "scene spec: frame too small");
  GEBD_CHECK_ARG(!spec.objects.empty(), "scene spec: needs at least one object");
  int64_t prev = 0;
  for (const auto& ev : spec.events) {
    GEBD_CHECK_ARG(ev.frame > 0 && ev.frame < spec.length,
                   "scene spec: event frame outside (0, length)");
    GEBD_CHECK_ARG(ev.frame > prev, "scene spec: event frames must strictly ascend");
    prev = ev.frame;
  }
}

GeneratedVideo generate_impl(const SyntheticSceneSpec& spec, int64_t drop_events_after) {
  validate_spec(spec);
  const int64_t h = spec.height, w = spec.width, t = spec.length;
  GeneratedVideo out;
  out.frames.video_id = spec.video_id;
  out.frames.t = t;
  out.frames.h = h;
  out.frames.w = w;
  out.frames.fps = spec.fps;
  out.frames.rgb.resize(static_cast<size_t>(t * 3 * h * w));

  Rng scene_rng(spec.seed);
  SceneState state{spec.background, spec.objects};
  size_t next_event = 0;
  for (int64_t frame = 0; frame < t; ++frame) {
    if (next_event < spec.events.size() && spec.events[next_event].frame == frame) {
      if (drop_events_after < 0 || frame <= drop_events_after)
        apply_event(state, spec.events[next_event], scene_rng, static_cast<double>(h),
                    static_cast<double>(w));
      ++next_event;
    }
    render_frame(state, h, w, out.frames.rgb.data() + frame * 3 * h * w);
    step_positions(state, static_cast<double>(h), static_cast<double>(w));
  }

  out.annotation.video_id = spec.video_id;
  out.annotation.duration_sec = static_cast<double>(t) / spec.fps;
  out.annotation.fps = spec.fps;
  std::vector<double> stamps;
  for (const auto& ev : spec.events) {
    stamps.push_back(static_cast<double>(ev.frame) / spec.fps);
    out.motion_only.push_back(is_motion_only(ev.type));
  }
  out.annotation.annotators.push_back(std::move(stamps));
  return out;
}

}  // namespace

GeneratedVideo generate_synthetic_video(const SyntheticSceneSpec& spec) {
  return generate_impl(spec, -1);
}

GeneratedVideo generate_without_events_after(const SyntheticSceneSpec& spec, int64_t upto_frame) {
  return generate_impl(spec, upto_frame);
}

SyntheticSceneSpec random_scene_spec(const std::string& video_id, uint64_t seed,
                                     const SceneProfile& profile) {
  SyntheticSceneSpec spec;
  spec.video_id = video_id;
  spec.length = profile.length;
  spec.height = profile.height;
  spec.width = profile.width;
  spec.fps = profile.fps;
  spec.seed = seed;

  Rng rng(seed);
  Rng scene = rng.fork("scene");
  spec.background = random_background(scene);
  int n_objects = 1 + static_cast<int>(scene.uniform_int(2));
  for (int i = 0; i < n_objects; ++i)
    spec.objects.push_back(
        random_object(scene, static_cast<double>(profile.height),
                      static_cast<double>(profile.width)));

  Rng evr = rng.fork("events");
  GEBD_CHECK_ARG(profile.min_events >= 1 && profile.max_events >= profile.min_events,
                 "scene profile: bad event count range");
  int n_events = profile.min_events +
                 static_cast<int>(evr.uniform_int(
                     static_cast<uint64_t>(profile.max_events - profile.min_events + 1)));
  // segment boundaries with jitter; segments keep a learnable minimum length
  double seg = static_cast<double>(profile.length) / static_cast<double>(n_events + 1);
  int64_t prev = 0;
  for (int e = 0; e < n_events; ++e) {
    double base = seg * static_cast<double>(e + 1);
    double jit = evr.uniform(-0.25, 0.25) * seg;
    int64_t frame = static_cast<int64_t>(base + jit);
    frame = std::clamp<int64_t>(frame, prev + 4, profile.length - 4);
    if (frame <= prev) continue;
    SceneEvent ev;
    ev.frame = frame;
    if (profile.pure_motion) {
      ev.type = evr.bernoulli(0.5) ? EventType::direction_change : EventType::speed_change;
    } else if (e % 2 == 0) {
      ev.type = evr.bernoulli(0.5) ? EventType::direction_change : EventType::speed_change;
    } else {
      ev.type = evr.bernoulli(0.5) ? EventType::shot_cut : EventType::color_change;
    }
    spec.events.push_back(ev);
    prev = frame;
  }
  return spec;
}

// ---------------- storage ----------------

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  GEBD_CHECK_IO(in.good(), "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::io_error, "failed to parse " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  GEBD_CHECK_IO(out.good(), "cannot write " + path);
  out << j.dump(2) << "\n";
  GEBD_CHECK_IO(out.good(), "failed while writing " + path);
}

std::string frame_name(int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05lld.png", static_cast<long long>(index));
  return buf;
}

}  // namespace

void save_video_frames(const std::string& dir, const VideoFrames& frames, FrameFormat format) {
  GEBD_CHECK_ARG(frames.t >= 1, "save_video_frames: empty video");
  GEBD_CHECK_ARG(static_cast<int64_t>(frames.rgb.size()) == frames.t * 3 * frames.h * frames.w,
                 "save_video_frames: buffer size mismatch");
  fs::create_directories(dir);
  json meta;
  meta["video_id"] = frames.video_id;
  meta["fps"] = frames.fps;
  meta["num_frames"] = frames.t;
  meta["height"] = frames.h;
  meta["width"] = frames.w;
  meta["format"] = format == FrameFormat::png ? "png" : "raw";
  write_json_file((fs::path(dir) / "meta.json").string(), meta);

  if (format == FrameFormat::raw) {
    std::ofstream bin(fs::path(dir) / "frames.bin", std::ios::binary);
    GEBD_CHECK_IO(bin.good(), "cannot write frames.bin in " + dir);
    bin.write(reinterpret_cast<const char*>(frames.rgb.data()),
              static_cast<std::streamsize>(frames.rgb.size()));
    GEBD_CHECK_IO(bin.good(), "failed while writing frames.bin in " + dir);
    return;
  }
  const int64_t h = frames.h, w = frames.w;
  cv::Mat bgr(static_cast<int>(h), static_cast<int>(w), CV_8UC3);
  for (int64_t t = 0; t < frames.t; ++t) {
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        auto& px = bgr.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
        px[0] = frames.at(t, 2, y, x);
        px[1] = frames.at(t, 1, y, x);
        px[2] = frames.at(t, 0, y, x);
      }
    std::string path = (fs::path(dir) / frame_name(t)).string();
    GEBD_CHECK_IO(cv::imwrite(path, bgr), "failed to write " + path);
  }
}

VideoFrames load_video_frames(const std::string& dir) {
  json meta = read_json_file((fs::path(dir) / "meta.json").string());
  VideoFrames frames;
  frames.video_id = meta.at("video_id").get<std::string>();
  frames.fps = meta.at("fps").get<double>();
  frames.t = meta.at("num_frames").get<int64_t>();
  frames.h = meta.at("height").get<int64_t>();
  frames.w = meta.at("width").get<int64_t>();
  GEBD_CHECK_IO(frames.t >= 1 && frames.h >= 1 && frames.w >= 1,
                dir + "/meta.json: invalid dimensions");
  frames.rgb.resize(static_cast<size_t>(frames.t * 3 * frames.h * frames.w));
  std::string format = meta.at("format").get<std::string>();

  if (format == "raw") {
    std::ifstream bin(fs::path(dir) / "frames.bin", std::ios::binary);
    GEBD_CHECK_IO(bin.good(), "cannot open frames.bin in " + dir);
    bin.read(reinterpret_cast<char*>(frames.rgb.data()),
             static_cast<std::streamsize>(frames.rgb.size()));
    GEBD_CHECK_IO(bin.gcount() == static_cast<std::streamsize>(frames.rgb.size()),
                  "frames.bin truncated in " + dir);
    return frames;
  }
  GEBD_CHECK_IO(format == "png", dir + "/meta.json: unknown format " + format);
  for (int64_t t = 0; t < frames.t; ++t) {
    std::string path = (fs::path(dir) / frame_name(t)).string();
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    GEBD_CHECK_IO(!bgr.empty(),
                  "missing or corrupt frame index " + std::to_string(t) + " at " + path);
    GEBD_CHECK_IO(bgr.rows == frames.h && bgr.cols == frames.w,
                  "frame index " + std::to_string(t) + " has unexpected size at " + path);
    for (int64_t y = 0; y < frames.h; ++y)
      for (int64_t x = 0; x < frames.w; ++x) {
        const auto& px = bgr.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
        frames.rgb[static_cast<size_t>(((t * 3 + 0) * frames.h + y) * frames.w + x)] = px[2];
        frames.rgb[static_cast<size_t>(((t * 3 + 1) * frames.h + y) * frames.w + x)] = px[1];
        frames.rgb[static_cast<size_t>(((t * 3 + 2) * frames.h + y) * frames.w + x)] = px[0];
      }
  }
  return frames;
}

// ---------------- corpus ----------------

void save_manifest(const std::string& dir, const CorpusManifest& manifest) {
  json videos = json::array();
  for (const auto& e : manifest.entries) {
    json v;
    v["video_id"] = e.video_id;
    v["frames_path"] = e.frames_path;
    v["fps"] = e.fps;
    v["num_frames"] = e.num_frames;
    v["split"] = e.split;
    v["boundary_tags"] = e.boundary_tags;
    videos.push_back(std::move(v));
  }
  write_json_file((fs::path(dir) / "manifest.json").string(), json{{"videos", videos}});
}

CorpusManifest load_manifest(const std::string& path) {
  fs::path p(path);
  if (fs::is_directory(p)) p /= "manifest.json";
  json j = read_json_file(p.string());
  GEBD_CHECK_IO(j.contains("videos") && j["videos"].is_array(),
                p.string() + ": expected top-level \"videos\" array");
  CorpusManifest m;
  m.root = p.parent_path().string();
  std::vector<std::string> seen;
  for (const auto& v : j["videos"]) {
    ManifestEntry e;
    e.video_id = v.at("video_id").get<std::string>();
    e.frames_path = v.at("frames_path").get<std::string>();
    e.fps = v.at("fps").get<double>();
    e.num_frames = v.at("num_frames").get<int64_t>();
    e.split = v.at("split").get<std::string>();
    if (v.contains("boundary_tags"))
      e.boundary_tags = v["boundary_tags"].get<std::vector<std::string>>();
    GEBD_CHECK_IO(e.split == "train" || e.split == "val",
                  "manifest: unknown split \"" + e.split + "\" for " + e.video_id);
    GEBD_CHECK_IO(std::find(seen.begin(), seen.end(), e.video_id) == seen.end(),
                  "manifest: duplicate video_id " + e.video_id);
    seen.push_back(e.video_id);
    m.entries.push_back(std::move(e));
  }
  // atomic load: verify everything referenced exists before returning
  for (const auto& e : m.entries) {
    fs::path vdir = fs::path(m.root) / e.frames_path;
    GEBD_CHECK_IO(fs::exists(vdir / "meta.json"),
                  "manifest: missing video directory for " + e.video_id + " at " + vdir.string());
  }
  return m;
}

CorpusManifest generate_corpus(const std::string& out_dir, const GenSynthOptions& options) {
  GEBD_CHECK_ARG(options.count >= 2, "generate_corpus: need at least 2 videos");
  fs::create_directories(out_dir);
  int64_t val_count = std::max<int64_t>(1, options.count / 5);
  int64_t train_count = options.count - val_count;

  CorpusManifest manifest;
  manifest.root = out_dir;
  std::vector<eval::AnnotationSet> annotations;
  for (int64_t i = 0; i < options.count; ++i) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth_%04lld", static_cast<long long>(i));
    std::string video_id = idbuf;
    bool is_val = i >= train_count;
    SceneProfile profile = options.profile;
    // half of the val split carries motion-only boundaries exclusively
    profile.pure_motion = is_val && ((i - train_count) % 2 == 0);
    SyntheticSceneSpec spec =
        random_scene_spec(video_id, derive_seed(options.seed, video_id), profile);
    GeneratedVideo video = generate_synthetic_video(spec);

    std::string rel = video_id;
    save_video_frames((fs::path(out_dir) / rel).string(), video.frames, options.format);

    ManifestEntry e;
    e.video_id = video_id;
    e.frames_path = rel;
    e.fps = spec.fps;
    e.num_frames = spec.length;
    e.split = is_val ? "val" : "train";
    for (bool m : video.motion_only) e.boundary_tags.push_back(m ? "motion" : "appearance");
    manifest.entries.push_back(std::move(e));
    annotations.push_back(video.annotation);
  }
  save_manifest(out_dir, manifest);
  eval::save_annotations_json((fs::path(out_dir) / "annotations.json").string(), annotations);
  return manifest;
}

Tensor to_model_input(const VideoFrames& frames, int64_t t) {
  GEBD_CHECK_ARG(t >= 0 && t < frames.t, "to_model_input: frame index out of range");
  Tensor out({3, frames.h, frames.w});
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < frames.h; ++y)
      for (int64_t x = 0; x < frames.w; ++x)
        out[(c * frames.h + y) * frames.w + x] =
            static_cast<double>(frames.at(t, c, y, x)) / 255.0 - 0.5;
  return out;
}

}  // namespace gebd::data
