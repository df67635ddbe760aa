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
#include <deque>
#include <utility>
#include <vector>

#include "gebd/autograd.hpp"
#include "gebd/common.hpp"
#include "gebd/data.hpp"
#include "gebd/encoder.hpp"
#include "gebd/nn.hpp"
#include "gebd/tensor.hpp"

namespace gebd::pretext {

using ag::Var;

// Five-transform augmentation pipeline: scaled crop, color jitter,
// grayscale, Gaussian blur, horizontal flip. Every parameter is drawn
// from the seed in a fixed order regardless of which transforms fire,
// so one probability change never shifts another transform's draw.
struct AugmentConfig {
  int64_t out_side = 32;  // output spatial side; match EncoderConfig::input_side

  double p_scale = 1.0;  // probability of a random area crop before resize
  double min_area = 0.2;
  double max_area = 1.0;

  double p_jitter = 0.8;
  double jitter_strength = 0.4;  // brightness/contrast/saturation range +-40%

  double p_gray = 0.2;

  double p_blur = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;

  double p_flip = 0.5;

  void validate() const;
};

// frame: (3, H, W) in [-0.5, 0.5] -> (3, out_side, out_side) in the same
// range. Deterministic per (frame, cfg, seed); with every probability at
// zero the output is the plain bilinear resize of the input.
Tensor augment(const Tensor& frame, const AugmentConfig& cfg, uint64_t seed);

// Three distinct frames of one video; the first is augmented twice under
// independent parameter draws to form the anchor/positive pair.
struct FrameTriplet {
  std::array<int64_t, 3> source_indices{};  // distinct, uniform without replacement
  Tensor v1_anchor;    // (3, S, S)
  Tensor v1_positive;  // same source frame as v1_anchor, independent draw
  Tensor v2;
  Tensor v3;
  uint64_t augmentation_seed = 0;
};

// Requires video.t >= 3.
FrameTriplet sample_frame_triplet(const data::VideoFrames& video, const AugmentConfig& cfg,
                                  uint64_t seed);

// Two tuples of k clips each; clip c of either tuple holds clip_len
// consecutive frames from segment c of an equal k-way split of the video.
// Frames within one clip share one augmentation draw; clips are independent.
struct ClipTuplePair {
  int64_t k = 0;
  int64_t clip_len = 0;
  std::vector<std::pair<int64_t, int64_t>> segment_bounds;  // half-open [lo, hi)
  std::vector<std::vector<int64_t>> anchor_frames;          // k lists, ascending
  std::vector<std::vector<int64_t>> positive_frames;
  std::vector<Tensor> anchor_clips;  // k tensors (clip_len, 3, S, S)
  std::vector<Tensor> positive_clips;
};

// Requires every segment to hold >= clip_len frames, i.e. floor(t/k) >= clip_len.
ClipTuplePair sample_clip_tuples(const data::VideoFrames& video, int64_t k, int64_t clip_len,
                                 const AugmentConfig& cfg, uint64_t seed);

// FIFO store of unit-norm key embeddings. Oldest entries leave first;
// size stays at capacity once warm.
class NegativeQueue {
 public:
  NegativeQueue(int64_t capacity, int64_t dim);

  // Each key must be a unit-norm (dim) tensor; |keys| must fit the capacity.
  void push(const std::vector<Tensor>& keys);

  int64_t size() const { return static_cast<int64_t>(entries_.size()); }
  int64_t capacity() const { return capacity_; }
  int64_t dim() const { return dim_; }
  const std::deque<Tensor>& entries() const { return entries_; }

  // (size, dim) copy, oldest entry first. Errors when empty.
  Tensor stacked() const;

 private:
  int64_t capacity_;
  int64_t dim_;
  std::deque<Tensor> entries_;
};

// Softmax cross-entropy against index 0 of a 1D logit vector:
// logsumexp(logits) - logits[0]. Invariant to a common additive shift.
Var info_nce_from_logits(const Var& logits);

// Contrastive loss with sim(a, b) = (a . b) / tau; q, p, and negatives are
// unit embeddings of one width. Negatives may be empty only where the
// calling task defines it.
Var info_nce(const Var& q, const Var& p, const std::vector<Var>& negatives, double tau);

// Same loss with negatives given as constant stacked rows (n, dim).
Var info_nce_queue(const Var& q, const Var& p, const Tensor& negatives, double tau);

// Anchor against its same-frame positive with the two remaining triplet
// frames as the only negatives.
Var intra_loss(const Var& q, const Var& p_positive, const Var& p2, const Var& p3, double tau);

// Mean of three queue-negative losses, one per triplet positive, all
// sharing the anchor and the queue. Errors on an empty queue.
Var inter_loss(const Var& q, const std::array<Var, 3>& positives, const NegativeQueue& queue,
               double tau);

// Mean of per-clip feature vectors: (k x (F)) -> (F).
Var tuple_consensus(const std::vector<Var>& clip_features);

// Queue-negative loss between the projected consensus embeddings of the
// anchor and positive tuples. Errors on an empty queue.
Var segment_loss(const Var& q_segment, const Var& p_segment, const NegativeQueue& queue,
                 double tau);

// Marginal penalty of adding the shuffled-tuple embedding as one extra
// negative: relu(nce_with_shuffled - nce_without). Exactly zero when the
// shuffle is a no-op on the embedding (order-insensitive aggregation).
Var order_regularizer(const Var& q_ordered, const Var& q_shuffled, const Var& p_positive,
                      const NegativeQueue& queue, double tau);

// Uniform over the k! - 1 non-identity permutations. Requires k >= 2.
std::vector<int64_t> sample_non_identity_permutation(int64_t k, Rng& rng);

struct PretextLossBundle {
  double intra = 0.0;
  double inter = 0.0;
  double segment = 0.0;
  double order = 0.0;
  double total = 0.0;  // weighted sum; equals intra+inter+segment+order at unit weights
};

struct PretrainConfig {
  enc::EncoderConfig encoder = enc::tiny_config();
  AugmentConfig augment;  // out_side is forced to encoder.input_side on validate

  int64_t queue_capacity = 256;
  double temperature = 0.01;
  int64_t batch_size = 4;
  int64_t clip_len = 4;

  double base_lr = 0.01;
  double sgd_momentum = 0.9;
  double weight_decay = 0.0;
  int64_t warmup_steps = 0;
  int64_t total_steps = 200;
  double key_momentum = 0.999;

  // Reweighting hook; the reference objective keeps all four at 1.
  double weight_intra = 1.0;
  double weight_inter = 1.0;
  double weight_segment = 1.0;
  double weight_order = 1.0;

  uint64_t seed = 1;

  void validate() const;
};

// Owns the dual towers, optimizer, and both negative queues. One step:
// build the four losses over a batch, backpropagate through the query
// tower, optimizer step, momentum-update the key tower, then push the
// step's key embeddings. Queues must be warmed before the first step.
class PretrainController {
 public:
  explicit PretrainController(const PretrainConfig& cfg);

  // Full loss graph for a batch at the current step index; no mutation.
  // Component Vars hold unweighted batch means; total applies the weights.
  struct StepGraph {
    Var intra, inter, segment, order;
    Var total;
    std::vector<Tensor> inter_keys;    // 3 per video, batch order
    std::vector<Tensor> segment_keys;  // 1 per video
    PretextLossBundle bundle() const;
  };
  StepGraph compute(const std::vector<const data::VideoFrames*>& batch);

  // compute + backward + update + queue pushes. Errors on non-finite loss
  // before touching any state.
  PretextLossBundle step(const std::vector<const data::VideoFrames*>& batch);

  // Pre-fills both queues with key-tower embeddings; no parameter updates.
  void warm_queues(const std::vector<const data::VideoFrames*>& videos);

  const PretrainConfig& config() const { return cfg_; }
  enc::DualEncoder& dual() { return dual_; }
  const enc::DualEncoder& dual() const { return dual_; }
  nn::SgdOptimizer& optimizer() { return opt_; }
  const NegativeQueue& inter_queue() const { return inter_queue_; }
  const NegativeQueue& segment_queue() const { return segment_queue_; }
  int64_t step_count() const { return opt_.step_count(); }

 private:
  struct VideoTerms {
    Var intra, inter, segment, order;
    std::vector<Tensor> inter_keys;
    Tensor segment_key;
  };
  VideoTerms video_terms(const data::VideoFrames& video, uint64_t seed);

  PretrainConfig cfg_;
  enc::DualEncoder dual_;
  nn::SgdOptimizer opt_;
  NegativeQueue inter_queue_;
  NegativeQueue segment_queue_;
};

}  // namespace gebd::pretext
