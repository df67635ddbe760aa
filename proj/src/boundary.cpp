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

#include "gebd/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "gebd/pretext.hpp"

namespace gebd::boundary {

using nlohmann::json;

// ---------------- candidate windows ----------------

std::vector<CandidateWindow> build_candidate_windows(int64_t t, int64_t window, int64_t dilation,
                                                     int64_t stride, bool include_candidate) {
  GEBD_CHECK_ARG(t >= 1, "candidate windows: video must have at least one frame");
  GEBD_CHECK_ARG(window >= 1, "candidate windows: window must be >= 1");
  GEBD_CHECK_ARG(dilation >= 1, "candidate windows: dilation must be >= 1");
  GEBD_CHECK_ARG(stride >= 1, "candidate windows: stride must be >= 1");
  std::vector<CandidateWindow> out;
  for (int64_t c = 0; c < t; c += stride) {
    CandidateWindow cw;
    cw.candidate_index = c;
    cw.context_indices.reserve(2 * window + (include_candidate ? 1 : 0));
    auto clamped = [&](int64_t f) { return std::clamp<int64_t>(f, 0, t - 1); };
    for (int64_t j = window; j >= 1; --j) cw.context_indices.push_back(clamped(c - j * dilation));
    if (include_candidate) cw.context_indices.push_back(c);
    for (int64_t j = 1; j <= window; ++j) cw.context_indices.push_back(clamped(c + j * dilation));
    out.push_back(std::move(cw));
  }
  return out;
}

// ---------------- labels ----------------

SoftLabelTrack soft_labels(const std::vector<int64_t>& boundary_frames, int64_t t, double sigma) {
  GEBD_CHECK_ARG(t >= 1, "soft labels: video must have at least one frame");
  GEBD_CHECK_ARG(sigma >= 0.0, "soft labels: sigma must be >= 0");
  for (int64_t b : boundary_frames)
    GEBD_CHECK_ARG(b >= 0 && b < t, "soft labels: boundary frame outside the video");
  SoftLabelTrack track;
  track.sigma = sigma;
  track.labels.assign(static_cast<size_t>(t), 0.0);
  for (int64_t b : boundary_frames) {
    if (sigma == 0.0) {
      track.labels[static_cast<size_t>(b)] = 1.0;
      continue;
    }
    int64_t radius = static_cast<int64_t>(std::floor(4.0 * sigma));
    int64_t lo = std::max<int64_t>(0, b - radius);
    int64_t hi = std::min<int64_t>(t - 1, b + radius);
    for (int64_t f = lo; f <= hi; ++f) {
      double d = static_cast<double>(f - b);
      double v = std::exp(-(d * d) / (2.0 * sigma * sigma));
      track.labels[static_cast<size_t>(f)] = std::max(track.labels[static_cast<size_t>(f)], v);
    }
  }
  return track;
}

std::vector<int64_t> boundary_frames_from_sec(const std::vector<double>& boundaries_sec,
                                              double fps, int64_t t) {
  GEBD_CHECK_ARG(fps > 0.0, "boundary frames: fps must be positive");
  GEBD_CHECK_ARG(t >= 1, "boundary frames: video must have at least one frame");
  std::vector<int64_t> frames;
  frames.reserve(boundaries_sec.size());
  for (double s : boundaries_sec) {
    int64_t f = std::llround(s * fps);
    GEBD_CHECK_ARG(f >= 0 && f < t, "boundary frames: timestamp outside the video");
    frames.push_back(f);
  }
  std::sort(frames.begin(), frames.end());
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  return frames;
}

void assign_soft_labels(std::vector<CandidateWindow>& windows, const SoftLabelTrack& track) {
  for (CandidateWindow& w : windows) {
    GEBD_CHECK_ARG(w.candidate_index >= 0 &&
                       w.candidate_index < static_cast<int64_t>(track.labels.size()),
                   "soft labels: candidate outside the label track");
    w.label = track.labels[static_cast<size_t>(w.candidate_index)];
  }
}

void assign_hard_labels(std::vector<CandidateWindow>& windows,
                        const std::vector<int64_t>& boundary_frames) {
  for (CandidateWindow& w : windows) w.label = 0.0;
  if (boundary_frames.empty()) return;
  GEBD_CHECK_ARG(!windows.empty(), "hard labels: no candidate windows");
  for (int64_t b : boundary_frames) {
    size_t best = 0;
    int64_t best_dist = std::abs(windows[0].candidate_index - b);
    for (size_t i = 1; i < windows.size(); ++i) {
      int64_t d = std::abs(windows[i].candidate_index - b);
      if (d < best_dist) {
        best = i;
        best_dist = d;
      }
    }
    windows[best].label = 1.0;
  }
}

// ---------------- model ----------------

void BoundaryConfig::validate() const {
  encoder.validate();
  GEBD_CHECK_CFG(window >= 1, "boundary config: window must be >= 1");
  GEBD_CHECK_CFG(dilation >= 1, "boundary config: dilation must be >= 1");
  GEBD_CHECK_CFG(candidate_stride >= 1, "boundary config: candidate_stride must be >= 1");
  GEBD_CHECK_CFG(hidden >= 1, "boundary config: hidden must be >= 1");
}

json boundary_config_to_json(const BoundaryConfig& c) {
  json j;
  j["window"] = c.window;
  j["dilation"] = c.dilation;
  j["candidate_stride"] = c.candidate_stride;
  j["include_candidate"] = c.include_candidate;
  j["hidden"] = c.hidden;
  j["temporal_enabled"] = c.temporal_enabled;
  j["ms_enabled"] = c.ms_enabled;
  return j;
}

BoundaryConfig boundary_config_from_json(const json& j) {
  BoundaryConfig c;
  c.window = j.at("window").get<int64_t>();
  c.dilation = j.at("dilation").get<int64_t>();
  c.candidate_stride = j.at("candidate_stride").get<int64_t>();
  c.include_candidate = j.at("include_candidate").get<bool>();
  c.hidden = j.at("hidden").get<int64_t>();
  c.temporal_enabled = j.at("temporal_enabled").get<bool>();
  c.ms_enabled = j.at("ms_enabled").get<bool>();
  return c;
}

BoundaryModel::BoundaryModel(const BoundaryConfig& config, uint64_t seed) : cfg_(config) {
  cfg_.validate();
  Rng rng(derive_seed(seed, "boundary"));
  encoder_ = std::make_unique<enc::Encoder>(cfg_.encoder, params_, rng);
  int64_t din = cfg_.context_size() * cfg_.encoder.feature_dim;
  fc1_ = nn::make_linear(params_, "cls.fc1", din, cfg_.hidden, true, rng);
  fc2_ = nn::make_linear(params_, "cls.fc2", cfg_.hidden, 1, true, rng);
}

Var BoundaryModel::window_logit(const Var& window_frames) const {
  const auto& d = window_frames.shape();
  GEBD_CHECK_ARG(d.size() == 4 && d[0] == cfg_.context_size() && d[1] == 3 &&
                     d[2] == cfg_.encoder.input_side && d[3] == cfg_.encoder.input_side,
                 "window logit: frames must be (context, 3, S, S)");
  enc::EncodeOptions opt;
  opt.temporal_enabled = cfg_.temporal_enabled;
  opt.ms_enabled = cfg_.ms_enabled;
  enc::EncodeResult res = encoder_->encode(window_frames, opt);
  Var x = ag::reshape(res.pooled, {1, cfg_.context_size() * cfg_.encoder.feature_dim});
  Var h = ag::relu(fc1_(x));
  return ag::reshape(fc2_(h), {1});
}

double BoundaryModel::predict(const Tensor& window_frames) const {
  Var logit = window_logit(Var::constant(window_frames));
  return ag::sigmoid(logit).val()[0];
}

namespace {

bool is_classifier_param(const std::string& name) { return name.rfind("cls.", 0) == 0; }

std::string checkpoint_name(const std::string& param_name) {
  return is_classifier_param(param_name) ? param_name : "query." + param_name;
}

// Overwrites every model parameter from the checkpoint, encoder weights under
// the "query." prefix and classifier weights under their own names.
void read_all_params(const ckpt::Checkpoint& c, const nn::ParamStore& params) {
  for (const auto& [name, v] : params.entries()) {
    std::string key = checkpoint_name(name);
    GEBD_CHECK_ARG(c.has(key), "checkpoint is missing tensor " + key);
    const Tensor& src = c.get(key);
    GEBD_CHECK_ARG(src.shape() == v.shape(), "checkpoint tensor " + key + " has the wrong shape");
    v.mutable_value() = src;
  }
}

}  // namespace

ckpt::Checkpoint BoundaryModel::to_checkpoint() const {
  ckpt::Checkpoint c;
  c.meta["stage"] = "finetune";
  c.meta["config"] = ckpt::encoder_config_to_json(cfg_.encoder);
  c.meta["boundary"] = boundary_config_to_json(cfg_);
  for (const auto& [name, v] : params_.entries()) c.add(checkpoint_name(name), v.val());
  return c;
}

void BoundaryModel::load_pretrained_encoder(const ckpt::Checkpoint& c) {
  GEBD_CHECK_ARG(c.meta.contains("config"), "checkpoint has no encoder config");
  GEBD_CHECK_ARG(ckpt::encoder_config_to_json(cfg_.encoder) == c.meta.at("config"),
                 "checkpoint encoder config does not match the model");
  for (const auto& [name, v] : params_.entries()) {
    if (is_classifier_param(name)) continue;
    std::string key = "query." + name;
    GEBD_CHECK_ARG(c.has(key), "checkpoint is missing tensor " + key);
    const Tensor& src = c.get(key);
    GEBD_CHECK_ARG(src.shape() == v.shape(), "checkpoint tensor " + key + " has the wrong shape");
    v.mutable_value() = src;
  }
}

BoundaryModel BoundaryModel::from_checkpoint(const ckpt::Checkpoint& c) {
  GEBD_CHECK_ARG(c.meta.contains("config") && c.meta.contains("boundary"),
                 "checkpoint lacks boundary metadata");
  BoundaryConfig cfg = boundary_config_from_json(c.meta.at("boundary"));
  cfg.encoder = ckpt::encoder_config_from_json(c.meta.at("config"));
  BoundaryModel model(cfg, 0);
  read_all_params(c, model.params_);
  return model;
}

Tensor gather_window_frames(const data::VideoFrames& video, const CandidateWindow& window,
                            int64_t side) {
  GEBD_CHECK_ARG(!window.context_indices.empty(), "gather: empty context");
  int64_t ctx = static_cast<int64_t>(window.context_indices.size());
  Tensor out({ctx, 3, side, side});
  pretext::AugmentConfig resize;
  resize.out_side = static_cast<int>(side);
  resize.p_scale = 0.0;
  resize.p_jitter = 0.0;
  resize.p_gray = 0.0;
  resize.p_blur = 0.0;
  resize.p_flip = 0.0;
  int64_t per = 3 * side * side;
  for (int64_t i = 0; i < ctx; ++i) {
    int64_t idx = window.context_indices[static_cast<size_t>(i)];
    GEBD_CHECK_ARG(idx >= 0 && idx < video.t, "gather: context index outside the video");
    Tensor frame = data::to_model_input(video, idx);
    if (video.h != side || video.w != side) frame = pretext::augment(frame, resize, 0);
    std::memcpy(out.data() + i * per, frame.data(), static_cast<size_t>(per) * sizeof(double));
  }
  return out;
}

std::vector<double> predict_candidates(const BoundaryModel& model, const data::VideoFrames& video,
                                       const std::vector<CandidateWindow>& windows) {
  std::vector<double> probs;
  probs.reserve(windows.size());
  for (const CandidateWindow& w : windows)
    probs.push_back(model.predict(gather_window_frames(video, w, model.config().encoder.input_side)));
  return probs;
}

// ---------------- postprocessing ----------------

std::vector<double> postprocess(const std::vector<double>& probabilities,
                                const std::vector<int64_t>& candidate_frames, double fps,
                                double threshold, double window_sec) {
  GEBD_CHECK_ARG(probabilities.size() == candidate_frames.size(),
                 "postprocess: probabilities and candidates must align");
  GEBD_CHECK_ARG(fps > 0.0, "postprocess: fps must be positive");
  GEBD_CHECK_ARG(window_sec >= 0.0, "postprocess: window_sec must be >= 0");
  for (size_t i = 1; i < candidate_frames.size(); ++i)
    GEBD_CHECK_ARG(candidate_frames[i] > candidate_frames[i - 1],
                   "postprocess: candidate frames must be strictly ascending");

  struct Pick {
    double time = 0.0;
    double p = 0.0;
  };
  std::vector<Pick> kept;
  for (size_t i = 0; i < probabilities.size(); ++i)
    if (probabilities[i] > threshold)
      kept.push_back({static_cast<double>(candidate_frames[i]) / fps, probabilities[i]});

  // Maximum-probability suppression: accept survivors strongest-first
  // (earliest on ties) and drop anything within window_sec of an accepted
  // boundary. An isolated group of proposals closer than window_sec thus
  // collapses onto its strongest member. Survivors above a higher threshold
  // are a prefix of this priority order, so raising the threshold never
  // changes an acceptance decision, only removes candidates.
  std::vector<size_t> order(kept.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (kept[a].p != kept[b].p) return kept[a].p > kept[b].p;
    return kept[a].time < kept[b].time;
  });
  std::vector<Pick> accepted;
  for (size_t i : order) {
    bool suppressed = false;
    for (const Pick& a : accepted)
      if (std::fabs(kept[i].time - a.time) <= window_sec) {
        suppressed = true;
        break;
      }
    if (!suppressed) accepted.push_back(kept[i]);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Pick& a, const Pick& b) { return a.time < b.time; });

  std::vector<double> out;
  out.reserve(accepted.size());
  for (const Pick& p : accepted) out.push_back(p.time);
  return out;
}

BoundaryPrediction detect_boundaries(const BoundaryModel& model, const data::VideoFrames& video,
                                     double threshold, double window_sec) {
  const BoundaryConfig& cfg = model.config();
  std::vector<CandidateWindow> windows = build_candidate_windows(
      video.t, cfg.window, cfg.dilation, cfg.candidate_stride, cfg.include_candidate);
  BoundaryPrediction pred;
  pred.video_id = video.video_id;
  pred.fps = video.fps;
  pred.threshold = threshold;
  pred.window_sec = window_sec;
  pred.candidate_frames.reserve(windows.size());
  for (const CandidateWindow& w : windows) pred.candidate_frames.push_back(w.candidate_index);
  pred.probabilities = predict_candidates(model, video, windows);
  pred.boundaries_sec =
      postprocess(pred.probabilities, pred.candidate_frames, video.fps, threshold, window_sec);
  return pred;
}

// ---------------- fine-tuning ----------------

void FinetuneConfig::validate() const {
  GEBD_CHECK_CFG(sigma >= 0.0, "finetune config: sigma must be >= 0");
  GEBD_CHECK_CFG(batch_size >= 2, "finetune config: batch_size must be >= 2");
  GEBD_CHECK_CFG(base_lr > 0.0, "finetune config: base_lr must be positive");
  GEBD_CHECK_CFG(sgd_momentum >= 0.0 && sgd_momentum < 1.0,
                 "finetune config: momentum must lie in [0, 1)");
  GEBD_CHECK_CFG(weight_decay >= 0.0, "finetune config: weight_decay must be >= 0");
  GEBD_CHECK_CFG(max_epochs >= 1, "finetune config: max_epochs must be >= 1");
  GEBD_CHECK_CFG(patience >= 1, "finetune config: patience must be >= 1");
  GEBD_CHECK_CFG(max_steps_per_epoch >= 0, "finetune config: max_steps_per_epoch must be >= 0");
  GEBD_CHECK_CFG(val_threshold > 0.0, "finetune config: val_threshold must be positive");
}

namespace {

struct Example {
  const data::VideoFrames* video = nullptr;
  CandidateWindow window;
};

std::vector<Example> build_examples(const std::vector<LabeledVideo>& videos,
                                    const BoundaryConfig& bc, const FinetuneConfig& fc) {
  std::vector<Example> out;
  for (const LabeledVideo& lv : videos) {
    GEBD_CHECK_ARG(lv.frames != nullptr, "finetune: labeled video without frames");
    const data::VideoFrames& v = *lv.frames;
    std::vector<CandidateWindow> windows = build_candidate_windows(
        v.t, bc.window, bc.dilation, bc.candidate_stride, bc.include_candidate);
    std::vector<int64_t> bframes = boundary_frames_from_sec(lv.boundaries_sec, v.fps, v.t);
    if (fc.soft)
      assign_soft_labels(windows, soft_labels(bframes, v.t, fc.sigma));
    else
      assign_hard_labels(windows, bframes);
    for (CandidateWindow& w : windows) out.push_back({lv.frames, std::move(w)});
  }
  return out;
}

double validation_f1(const BoundaryModel& model, const std::vector<LabeledVideo>& val,
                     const std::vector<eval::AnnotationSet>& sets, double threshold) {
  std::vector<std::vector<double>> dets;
  dets.reserve(val.size());
  for (const LabeledVideo& lv : val)
    dets.push_back(detect_boundaries(model, *lv.frames).boundaries_sec);
  eval::EvalReport report = eval::evaluate_corpus(dets, sets, {threshold}, false);
  return report.corpus[0].f1;
}

}  // namespace

FinetuneResult finetune(BoundaryModel& model, const std::vector<LabeledVideo>& train,
                        const std::vector<LabeledVideo>& val, const FinetuneConfig& cfg) {
  cfg.validate();
  GEBD_CHECK_ARG(!train.empty(), "finetune: empty training set");
  GEBD_CHECK_ARG(!val.empty(), "finetune: empty validation set");

  std::vector<Example> examples = build_examples(train, model.config(), cfg);
  std::vector<size_t> positives, negatives;
  for (size_t i = 0; i < examples.size(); ++i)
    (examples[i].window.label >= 0.5 ? positives : negatives).push_back(i);
  GEBD_CHECK_ARG(!positives.empty(), "finetune: no positive candidates in the training set");
  GEBD_CHECK_ARG(!negatives.empty(), "finetune: no negative candidates in the training set");

  int64_t pos_per_batch = (cfg.batch_size + 1) / 2;
  int64_t neg_per_batch = cfg.batch_size - pos_per_batch;
  bool positives_minority = positives.size() <= negatives.size();
  std::vector<size_t>& majority = positives_minority ? negatives : positives;
  const std::vector<size_t>& minority = positives_minority ? positives : negatives;
  int64_t majority_per_batch = positives_minority ? neg_per_batch : pos_per_batch;
  int64_t minority_per_batch = cfg.batch_size - majority_per_batch;

  int64_t steps_per_epoch =
      (static_cast<int64_t>(majority.size()) + majority_per_batch - 1) / majority_per_batch;
  if (cfg.max_steps_per_epoch > 0)
    steps_per_epoch = std::min(steps_per_epoch, cfg.max_steps_per_epoch);

  std::vector<eval::AnnotationSet> sets;
  sets.reserve(val.size());
  for (const LabeledVideo& lv : val) {
    GEBD_CHECK_ARG(lv.frames != nullptr, "finetune: labeled video without frames");
    eval::AnnotationSet s;
    s.video_id = lv.frames->video_id;
    s.duration_sec = lv.frames->duration_sec();
    s.fps = lv.frames->fps;
    s.annotators = {lv.boundaries_sec};
    eval::validate(s);
    sets.push_back(std::move(s));
  }

  if (cfg.freeze_encoder)
    for (const auto& [name, v] : model.params().entries())
      if (!is_classifier_param(name)) v.node()->requires_grad = false;
  nn::ParamStore trainable;
  for (const auto& [name, v] : model.params().entries())
    if (!cfg.freeze_encoder || is_classifier_param(name)) trainable.add_shared(name, v);
  nn::SgdOptimizer opt(trainable, cfg.base_lr, cfg.sgd_momentum, cfg.weight_decay, 0,
                       steps_per_epoch * cfg.max_epochs);

  int64_t side = model.config().encoder.input_side;
  Rng rng(derive_seed(cfg.seed, "finetune"));
  FinetuneResult result;
  double best_f1 = -1.0;
  for (int64_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    Rng er = rng.fork("epoch:" + std::to_string(epoch));
    er.shuffle(majority);
    size_t cursor = 0;
    double epoch_loss = 0.0;
    for (int64_t step = 0; step < steps_per_epoch; ++step) {
      std::vector<size_t> batch;
      batch.reserve(static_cast<size_t>(cfg.batch_size));
      for (int64_t k = 0; k < majority_per_batch; ++k) {
        if (cursor < majority.size())
          batch.push_back(majority[cursor++]);
        else
          batch.push_back(majority[er.uniform_int(static_cast<int64_t>(majority.size()))]);
      }
      for (int64_t k = 0; k < minority_per_batch; ++k)
        batch.push_back(minority[er.uniform_int(static_cast<int64_t>(minority.size()))]);

      std::vector<Var> losses;
      losses.reserve(batch.size());
      int64_t batch_positives = 0;
      for (size_t idx : batch) {
        const Example& ex = examples[idx];
        if (ex.window.label >= 0.5) ++batch_positives;
        Var frames = Var::constant(gather_window_frames(*ex.video, ex.window, side));
        losses.push_back(ag::bce_with_logits(model.window_logit(frames), ex.window.label));
      }
      result.batch_positive_counts.push_back(batch_positives);
      Var loss = ag::scale(ag::add_n(losses), 1.0 / static_cast<double>(cfg.batch_size));
      double lv = loss.val()[0];
      GEBD_CHECK(std::isfinite(lv),
                 "non-finite fine-tune loss at step " + std::to_string(opt.step_count()));
      model.params().zero_grad();
      loss.backward();
      opt.step();
      result.step_losses.push_back(lv);
      epoch_loss += lv;
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(steps_per_epoch));

    double f1 = validation_f1(model, val, sets, cfg.val_threshold);
    result.epoch_val_f1.push_back(f1);
    result.epochs_run = epoch + 1;
    if (f1 > best_f1) {
      best_f1 = f1;
      result.best = model.to_checkpoint();
      result.best.meta["epoch"] = epoch;
      result.best.meta["val_f1"] = f1;
      result.best_val_f1 = f1;
      result.best_epoch = epoch;
    }
    if (epoch - result.best_epoch >= cfg.patience) break;
  }

  read_all_params(result.best, model.params());
  if (cfg.freeze_encoder)
    for (const auto& [name, v] : model.params().entries())
      if (!is_classifier_param(name)) v.node()->requires_grad = true;
  return result;
}

}  // namespace gebd::boundary
