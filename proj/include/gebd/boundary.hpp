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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gebd/checkpoint.hpp"
#include "gebd/common.hpp"
#include "gebd/data.hpp"
#include "gebd/encoder.hpp"
#include "gebd/eval.hpp"
#include "gebd/nn.hpp"
#include "gebd/tensor.hpp"

namespace gebd::boundary {

using ag::Var;

// ---------------- candidate windows ----------------

// One scoring site: a candidate frame plus the dilated context frames whose
// pooled features feed the classifier. Context indices are clamped to
// [0, T), so they may repeat near the edges; their count never varies.
struct CandidateWindow {
  int64_t candidate_index = 0;
  std::vector<int64_t> context_indices;
  double label = 0.0;
};

// Candidates sit at frames 0, stride, 2*stride, ... < t. Each context is the
// 2*window offsets {-window*dilation, ..., -dilation, +dilation, ...,
// +window*dilation} around the candidate, in ascending offset order, clamped
// to [0, t). With include_candidate the candidate frame itself is inserted
// between the two halves, giving 2*window + 1 indices.
std::vector<CandidateWindow> build_candidate_windows(int64_t t, int64_t window, int64_t dilation,
                                                     int64_t stride, bool include_candidate);

// ---------------- labels ----------------

// Per-frame soft target track: max over boundaries b of
// exp(-(f - b)^2 / (2 sigma^2)), zero where |f - b| > 4 sigma. sigma == 0
// degenerates to the indicator of the boundary frames.
struct SoftLabelTrack {
  std::vector<double> labels;
  double sigma = 0.0;
};

SoftLabelTrack soft_labels(const std::vector<int64_t>& boundary_frames, int64_t t, double sigma);

// Maps annotated timestamps to frame indices (round to nearest). Every
// timestamp must land inside [0, t); the result is sorted and deduplicated.
std::vector<int64_t> boundary_frames_from_sec(const std::vector<double>& boundaries_sec,
                                              double fps, int64_t t);

// Copies track.labels[candidate_index] onto each window.
void assign_soft_labels(std::vector<CandidateWindow>& windows, const SoftLabelTrack& track);

// Hard targets: for each boundary frame the nearest candidate (earliest on
// ties) gets label 1; every other window gets 0.
void assign_hard_labels(std::vector<CandidateWindow>& windows,
                        const std::vector<int64_t>& boundary_frames);

// ---------------- model ----------------

struct BoundaryConfig {
  enc::EncoderConfig encoder = enc::tiny_config();
  int64_t window = 5;           // context half-width in taps
  int64_t dilation = 3;         // frames between taps
  int64_t candidate_stride = 3; // frames between scored candidates
  bool include_candidate = false;
  int64_t hidden = 64;          // classifier hidden width
  bool temporal_enabled = true;
  bool ms_enabled = true;       // motion fusion inside the encoder

  int64_t context_size() const { return 2 * window + (include_candidate ? 1 : 0); }
  void validate() const;
};

nlohmann::json boundary_config_to_json(const BoundaryConfig& c);
BoundaryConfig boundary_config_from_json(const nlohmann::json& j);

// Encoder plus a two-layer classifier over the concatenated context features.
// All parameters live in one store: encoder parameters under their canonical
// names, classifier parameters under "cls.". Checkpoints prefix the encoder
// names with "query." so a fine-tuned snapshot and a pretrained snapshot
// address the encoder identically.
class BoundaryModel {
 public:
  BoundaryModel(const BoundaryConfig& config, uint64_t seed);

  const BoundaryConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const enc::Encoder& encoder() const { return *encoder_; }

  // window_frames: (context_size, 3, S, S) -> scalar logit, shape (1).
  Var window_logit(const Var& window_frames) const;

  // Boundary probability for one gathered window. Read-only on parameters.
  double predict(const Tensor& window_frames) const;

  ckpt::Checkpoint to_checkpoint() const;

  // Loads "query."-prefixed encoder weights from a pretraining snapshot; the
  // stored encoder config must equal this model's. Classifier weights keep
  // their fresh initialization.
  void load_pretrained_encoder(const ckpt::Checkpoint& c);

  // Rebuilds a model from a fine-tuned snapshot (encoder and classifier).
  static BoundaryModel from_checkpoint(const ckpt::Checkpoint& c);

 private:
  BoundaryConfig cfg_;
  nn::ParamStore params_;
  std::unique_ptr<enc::Encoder> encoder_;
  nn::Linear fc1_, fc2_;
};

// Stacks the window's context frames as (context_size, 3, side, side) model
// inputs, resizing bilinearly when the video resolution differs from `side`.
Tensor gather_window_frames(const data::VideoFrames& video, const CandidateWindow& window,
                            int64_t side);

// Probability per window, in order.
std::vector<double> predict_candidates(const BoundaryModel& model, const data::VideoFrames& video,
                                       const std::vector<CandidateWindow>& windows);

// ---------------- postprocessing ----------------

// Keeps candidates with probability strictly above `threshold`, then
// aggregates survivors closer than window_sec onto the strongest of them:
// proposals are accepted strongest-first (earliest on ties) and suppressed
// within window_sec of an accepted boundary. Emitted timestamps are a subset
// of candidate_frames / fps, their pairwise gaps exceed window_sec, and
// raising the threshold never adds a boundary.
std::vector<double> postprocess(const std::vector<double>& probabilities,
                                const std::vector<int64_t>& candidate_frames, double fps,
                                double threshold = 0.5, double window_sec = 1.0);

struct BoundaryPrediction {
  std::string video_id;
  double fps = 0.0;
  double threshold = 0.5;
  double window_sec = 1.0;
  std::vector<int64_t> candidate_frames;
  std::vector<double> probabilities;   // parallel to candidate_frames
  std::vector<double> boundaries_sec;  // postprocessed
};

BoundaryPrediction detect_boundaries(const BoundaryModel& model, const data::VideoFrames& video,
                                     double threshold = 0.5, double window_sec = 1.0);

// ---------------- fine-tuning ----------------

struct LabeledVideo {
  const data::VideoFrames* frames = nullptr;
  std::vector<double> boundaries_sec;
};

struct FinetuneConfig {
  bool soft = true;     // Gaussian targets; false = nearest-candidate indicator
  double sigma = 3.0;   // soft label width, frames
  int64_t batch_size = 8;
  double base_lr = 0.005;
  double sgd_momentum = 0.9;
  double weight_decay = 0.0;
  int64_t max_epochs = 8;
  int64_t patience = 3;             // epochs without a new best before stopping
  int64_t max_steps_per_epoch = 0;  // 0 = full pass over the majority class
  double val_threshold = 0.05;      // relative-distance threshold for selection
  bool freeze_encoder = false;      // linear evaluation: train the classifier only
  uint64_t seed = 1;

  void validate() const;
};

struct FinetuneResult {
  ckpt::Checkpoint best;       // snapshot with the highest validation F1
  double best_val_f1 = 0.0;
  int64_t best_epoch = -1;
  int64_t epochs_run = 0;
  std::vector<double> step_losses;      // every optimization step
  std::vector<double> epoch_mean_loss;  // per epoch
  std::vector<double> epoch_val_f1;     // per epoch
  std::vector<int64_t> batch_positive_counts;  // labels >= 0.5 per batch
};

// Supervised boundary training. Candidates with label >= 0.5 are positives;
// every batch holds exactly ceil(batch_size / 2) positives, the minority
// class sampled with replacement and the majority class consumed in one
// shuffled pass per epoch. After each epoch the model is scored on `val` at
// val_threshold; training stops once `patience` epochs pass without a new
// best, and the model is restored to the best snapshot before returning.
// Throws when either class is empty.
FinetuneResult finetune(BoundaryModel& model, const std::vector<LabeledVideo>& train,
                        const std::vector<LabeledVideo>& val, const FinetuneConfig& cfg);

}  // namespace gebd::boundary
