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

#include "gebd/pretext.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <string>

namespace gebd::pretext {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// Crop region [top, top+ch) x [left, left+cw) of u:(3,H,W), bilinear-resized
// to (3, out, out) with half-pixel centers and edge replication. A 1:1 crop
// reproduces its pixels exactly.
Tensor crop_resize(const Tensor& u, int64_t top, int64_t left, int64_t ch, int64_t cw,
                   int64_t out) {
  const int64_t w = u.shape()[2];
  Tensor r({3, out, out});
  const double ys = static_cast<double>(ch) / static_cast<double>(out);
  const double xs = static_cast<double>(cw) / static_cast<double>(out);
  for (int64_t oy = 0; oy < out; ++oy) {
    const double sy = (static_cast<double>(oy) + 0.5) * ys - 0.5;
    int64_t y0 = static_cast<int64_t>(std::floor(sy));
    const double fy = sy - static_cast<double>(y0);
    const int64_t y0c = std::clamp<int64_t>(y0, 0, ch - 1);
    const int64_t y1c = std::clamp<int64_t>(y0 + 1, 0, ch - 1);
    for (int64_t ox = 0; ox < out; ++ox) {
      const double sx = (static_cast<double>(ox) + 0.5) * xs - 0.5;
      int64_t x0 = static_cast<int64_t>(std::floor(sx));
      const double fx = sx - static_cast<double>(x0);
      const int64_t x0c = std::clamp<int64_t>(x0, 0, cw - 1);
      const int64_t x1c = std::clamp<int64_t>(x0 + 1, 0, cw - 1);
      for (int64_t c = 0; c < 3; ++c) {
        const double* plane = u.data() + (c * u.shape()[1] + top) * w + left;
        const double v00 = plane[y0c * w + x0c];
        const double v01 = plane[y0c * w + x1c];
        const double v10 = plane[y1c * w + x0c];
        const double v11 = plane[y1c * w + x1c];
        const double vy0 = v00 + fx * (v01 - v00);
        const double vy1 = v10 + fx * (v11 - v10);
        r.data()[(c * out + oy) * out + ox] = vy0 + fy * (vy1 - vy0);
      }
    }
  }
  return r;
}

// Per-pixel luma of u:(3,S,S) into (S*S) scratch.
void luma(const Tensor& u, std::vector<double>& g) {
  const int64_t hw = u.shape()[1] * u.shape()[2];
  g.resize(static_cast<size_t>(hw));
  const double* r = u.data();
  const double* gr = u.data() + hw;
  const double* b = u.data() + 2 * hw;
  for (int64_t i = 0; i < hw; ++i) g[static_cast<size_t>(i)] = kLumaR * r[i] + kLumaG * gr[i] + kLumaB * b[i];
}

// Separable Gaussian with edge replication; kernel radius ceil(2*sigma).
void gaussian_blur(Tensor& u, double sigma) {
  const int64_t h = u.shape()[1];
  const int64_t w = u.shape()[2];
  const int64_t radius = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(2.0 * sigma)));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int64_t i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    norm += v;
  }
  for (double& v : k) v /= norm;

  std::vector<double> tmp(static_cast<size_t>(h * w));
  for (int64_t c = 0; c < 3; ++c) {
    double* plane = u.data() + c * h * w;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i) {
          const int64_t xx = std::clamp<int64_t>(x + i, 0, w - 1);
          acc += k[static_cast<size_t>(i + radius)] * plane[y * w + xx];
        }
        tmp[static_cast<size_t>(y * w + x)] = acc;
      }
    }
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int64_t i = -radius; i <= radius; ++i) {
          const int64_t yy = std::clamp<int64_t>(y + i, 0, h - 1);
          acc += k[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(yy * w + x)];
        }
        plane[y * w + x] = acc;
      }
    }
  }
}

// (N, 3, S, S) stack of single-frame tensors.
Tensor stack_frames(const std::vector<Tensor>& frames) {
  const int64_t s = frames[0].shape()[1];
  Tensor out({static_cast<int64_t>(frames.size()), 3, s, s});
  const int64_t per = 3 * s * s;
  for (size_t i = 0; i < frames.size(); ++i)
    std::memcpy(out.data() + static_cast<int64_t>(i) * per, frames[i].data(),
                static_cast<size_t>(per) * sizeof(double));
  return out;
}

}  // namespace

void AugmentConfig::validate() const {
  GEBD_CHECK_CFG(out_side >= 1, "augment: out_side must be positive");
  for (double p : {p_scale, p_jitter, p_gray, p_blur, p_flip})
    GEBD_CHECK_CFG(p >= 0.0 && p <= 1.0, "augment: probabilities must lie in [0, 1]");
  GEBD_CHECK_CFG(min_area > 0.0 && min_area <= max_area && max_area <= 1.0,
                 "augment: crop area range must satisfy 0 < min <= max <= 1");
  GEBD_CHECK_CFG(jitter_strength >= 0.0 && jitter_strength < 1.0,
                 "augment: jitter strength must lie in [0, 1)");
  GEBD_CHECK_CFG(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max,
                 "augment: blur sigma range must satisfy 0 < min <= max");
}

Tensor augment(const Tensor& frame, const AugmentConfig& cfg, uint64_t seed) {
  cfg.validate();
  GEBD_CHECK_ARG(frame.shape().size() == 3 && frame.shape()[0] == 3 && frame.shape()[1] >= 1 &&
                     frame.shape()[2] >= 1,
                 "augment: frame must be (3, H, W)");
  const int64_t h = frame.shape()[1];
  const int64_t w = frame.shape()[2];

  // All parameters are drawn up front in a fixed order.
  Rng rng(seed);
  const bool do_scale = rng.bernoulli(cfg.p_scale);
  const double area = rng.uniform(cfg.min_area, cfg.max_area);
  const double top_f = rng.uniform();
  const double left_f = rng.uniform();
  const bool do_jitter = rng.bernoulli(cfg.p_jitter);
  const double s = cfg.jitter_strength;
  const double f_bright = rng.uniform(1.0 - s, 1.0 + s);
  const double f_contrast = rng.uniform(1.0 - s, 1.0 + s);
  const double f_sat = rng.uniform(1.0 - s, 1.0 + s);
  const bool do_gray = rng.bernoulli(cfg.p_gray);
  const bool do_blur = rng.bernoulli(cfg.p_blur);
  const double sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);
  const bool do_flip = rng.bernoulli(cfg.p_flip);

  // Work in [0, 1] space; recenter at the end.
  Tensor u(frame.shape());
  for (int64_t i = 0; i < frame.numel(); ++i) u.data()[i] = frame.data()[i] + 0.5;

  int64_t ch = h, cw = w, top = 0, left = 0;
  if (do_scale) {
    const double side = std::sqrt(area);
    ch = std::clamp<int64_t>(static_cast<int64_t>(std::lround(side * static_cast<double>(h))), 1, h);
    cw = std::clamp<int64_t>(static_cast<int64_t>(std::lround(side * static_cast<double>(w))), 1, w);
    top = static_cast<int64_t>(top_f * static_cast<double>(h - ch + 1));
    left = static_cast<int64_t>(left_f * static_cast<double>(w - cw + 1));
  }
  Tensor out = crop_resize(u, top, left, ch, cw, cfg.out_side);
  const int64_t hw = cfg.out_side * cfg.out_side;

  std::vector<double> g;
  if (do_jitter) {
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = clamp01(out.data()[i] * f_bright);
    luma(out, g);
    const double mean_g = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(hw);
    for (int64_t i = 0; i < out.numel(); ++i)
      out.data()[i] = clamp01(f_contrast * out.data()[i] + (1.0 - f_contrast) * mean_g);
    luma(out, g);
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < hw; ++i) {
        double& v = out.data()[c * hw + i];
        v = clamp01(f_sat * v + (1.0 - f_sat) * g[static_cast<size_t>(i)]);
      }
  }
  if (do_gray) {
    luma(out, g);
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t i = 0; i < hw; ++i) out.data()[c * hw + i] = g[static_cast<size_t>(i)];
  }
  if (do_blur) gaussian_blur(out, sigma);
  if (do_flip) {
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < cfg.out_side; ++y) {
        double* row = out.data() + (c * cfg.out_side + y) * cfg.out_side;
        std::reverse(row, row + cfg.out_side);
      }
  }

  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] -= 0.5;
  return out;
}

FrameTriplet sample_frame_triplet(const data::VideoFrames& video, const AugmentConfig& cfg,
                                  uint64_t seed) {
  GEBD_CHECK_ARG(video.t >= 3, "frame triplet needs a video with at least 3 frames");
  Rng rng(seed);
  std::vector<int64_t> order(static_cast<size_t>(video.t));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  FrameTriplet tr;
  tr.source_indices = {order[0], order[1], order[2]};
  tr.augmentation_seed = seed;
  const uint64_t s_anchor = rng.next_u64();
  const uint64_t s_pos = rng.next_u64();
  const uint64_t s_v2 = rng.next_u64();
  const uint64_t s_v3 = rng.next_u64();
  tr.v1_anchor = augment(data::to_model_input(video, order[0]), cfg, s_anchor);
  tr.v1_positive = augment(data::to_model_input(video, order[0]), cfg, s_pos);
  tr.v2 = augment(data::to_model_input(video, order[1]), cfg, s_v2);
  tr.v3 = augment(data::to_model_input(video, order[2]), cfg, s_v3);
  return tr;
}

ClipTuplePair sample_clip_tuples(const data::VideoFrames& video, int64_t k, int64_t clip_len,
                                 const AugmentConfig& cfg, uint64_t seed) {
  GEBD_CHECK_ARG(k >= 1 && clip_len >= 1, "clip tuples need k >= 1 and clip_len >= 1");
  GEBD_CHECK_ARG(video.t / k >= clip_len,
                 "video too short: every one of the k segments must hold clip_len frames");
  Rng rng(seed);

  ClipTuplePair cp;
  cp.k = k;
  cp.clip_len = clip_len;
  std::vector<int64_t> anchor_off(static_cast<size_t>(k)), pos_off(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) {
    const int64_t lo = i * video.t / k;
    const int64_t hi = (i + 1) * video.t / k;
    cp.segment_bounds.emplace_back(lo, hi);
    const uint64_t span = static_cast<uint64_t>(hi - clip_len - lo + 1);
    anchor_off[static_cast<size_t>(i)] = lo + static_cast<int64_t>(rng.uniform_int(span));
    pos_off[static_cast<size_t>(i)] = lo + static_cast<int64_t>(rng.uniform_int(span));
  }
  for (int64_t i = 0; i < k; ++i) {
    const uint64_t s_anchor = rng.next_u64();
    const uint64_t s_pos = rng.next_u64();
    std::vector<int64_t> af, pf;
    std::vector<Tensor> ac, pc;
    for (int64_t j = 0; j < clip_len; ++j) {
      af.push_back(anchor_off[static_cast<size_t>(i)] + j);
      pf.push_back(pos_off[static_cast<size_t>(i)] + j);
      ac.push_back(augment(data::to_model_input(video, af.back()), cfg, s_anchor));
      pc.push_back(augment(data::to_model_input(video, pf.back()), cfg, s_pos));
    }
    cp.anchor_frames.push_back(std::move(af));
    cp.positive_frames.push_back(std::move(pf));
    cp.anchor_clips.push_back(stack_frames(ac));
    cp.positive_clips.push_back(stack_frames(pc));
  }
  return cp;
}

NegativeQueue::NegativeQueue(int64_t capacity, int64_t dim) : capacity_(capacity), dim_(dim) {
  GEBD_CHECK_ARG(capacity >= 1, "queue capacity must be positive");
  GEBD_CHECK_ARG(dim >= 1, "queue embedding width must be positive");
}

void NegativeQueue::push(const std::vector<Tensor>& keys) {
  GEBD_CHECK_ARG(static_cast<int64_t>(keys.size()) <= capacity_,
                 "push exceeds queue capacity");
  for (const Tensor& key : keys) {
    GEBD_CHECK_ARG(key.shape().size() == 1 && key.shape()[0] == dim_,
                   "queue key has the wrong width");
    GEBD_CHECK_ARG(std::abs(key.norm2() - 1.0) <= 1e-6, "queue keys must be unit norm");
  }
  for (const Tensor& key : keys) {
    entries_.push_back(key);
    if (static_cast<int64_t>(entries_.size()) > capacity_) entries_.pop_front();
  }
}

Tensor NegativeQueue::stacked() const {
  GEBD_CHECK_ARG(!entries_.empty(), "negative queue is empty; warm it before use");
  Tensor out({size(), dim_});
  int64_t r = 0;
  for (const Tensor& e : entries_) {
    std::memcpy(out.data() + r * dim_, e.data(), static_cast<size_t>(dim_) * sizeof(double));
    ++r;
  }
  return out;
}

Var info_nce_from_logits(const Var& logits) {
  GEBD_CHECK_ARG(logits.shape().size() == 1 && logits.numel() >= 1,
                 "info_nce logits must be a nonempty vector");
  const Var positive = ag::row(ag::reshape(logits, {logits.numel(), 1}), 0);
  return ag::sub(ag::logsumexp(logits), positive);
}

Var info_nce(const Var& q, const Var& p, const std::vector<Var>& negatives, double tau) {
  GEBD_CHECK_ARG(tau > 0.0, "info_nce temperature must be positive");
  GEBD_CHECK_ARG(q.shape().size() == 1 && q.numel() == p.numel(),
                 "info_nce embeddings must be vectors of one width");
  std::vector<Var> sims;
  sims.push_back(ag::scale(ag::dot(q, p), 1.0 / tau));
  for (const Var& n : negatives) {
    GEBD_CHECK_ARG(n.numel() == q.numel(), "info_nce negative has the wrong width");
    sims.push_back(ag::scale(ag::dot(q, n), 1.0 / tau));
  }
  return info_nce_from_logits(ag::concat_flat(sims));
}

Var info_nce_queue(const Var& q, const Var& p, const Tensor& negatives, double tau) {
  GEBD_CHECK_ARG(tau > 0.0, "info_nce temperature must be positive");
  GEBD_CHECK_ARG(negatives.shape().size() == 2 && negatives.shape()[1] == q.numel(),
                 "info_nce negatives must be (n, dim) matching the anchor");
  const Var s_pos = ag::scale(ag::dot(q, p), 1.0 / tau);
  const Var s_neg = ag::scale(ag::matvec_const(negatives, q), 1.0 / tau);
  return info_nce_from_logits(ag::concat_flat({s_pos, s_neg}));
}

Var intra_loss(const Var& q, const Var& p_positive, const Var& p2, const Var& p3, double tau) {
  return info_nce(q, p_positive, {p2, p3}, tau);
}

Var inter_loss(const Var& q, const std::array<Var, 3>& positives, const NegativeQueue& queue,
               double tau) {
  GEBD_CHECK_ARG(queue.size() > 0, "inter loss needs a warmed negative queue");
  const Tensor negs = queue.stacked();
  std::vector<Var> terms;
  for (const Var& p : positives) terms.push_back(info_nce_queue(q, p, negs, tau));
  return ag::scale(ag::add_n(terms), 1.0 / 3.0);
}

Var tuple_consensus(const std::vector<Var>& clip_features) {
  GEBD_CHECK_ARG(!clip_features.empty(), "consensus needs at least one clip feature");
  for (const Var& f : clip_features)
    GEBD_CHECK_ARG(f.shape().size() == 1 && f.numel() == clip_features[0].numel(),
                   "consensus clip features must be vectors of one width");
  return ag::scale(ag::add_n(clip_features), 1.0 / static_cast<double>(clip_features.size()));
}

Var segment_loss(const Var& q_segment, const Var& p_segment, const NegativeQueue& queue,
                 double tau) {
  GEBD_CHECK_ARG(queue.size() > 0, "segment loss needs a warmed negative queue");
  return info_nce_queue(q_segment, p_segment, queue.stacked(), tau);
}

Var order_regularizer(const Var& q_ordered, const Var& q_shuffled, const Var& p_positive,
                      const NegativeQueue& queue, double tau) {
  GEBD_CHECK_ARG(tau > 0.0, "order regularizer temperature must be positive");
  GEBD_CHECK_ARG(queue.size() > 0, "order regularizer needs a warmed negative queue");
  GEBD_CHECK_ARG(q_ordered.numel() == q_shuffled.numel(),
                 "ordered and shuffled embeddings must share a width");

  // No order signal when the shuffle left the embedding unchanged; the
  // self-similarity term would otherwise dominate as a spurious negative.
  double dd = 0.0;
  for (int64_t i = 0; i < q_ordered.numel(); ++i) {
    const double d = q_ordered.val()[i] - q_shuffled.val()[i];
    dd += d * d;
  }
  if (std::sqrt(dd) <= 1e-9) return Var::constant(Tensor::scalar(0.0));

  const Tensor negs = queue.stacked();
  const Var s_pos = ag::scale(ag::dot(q_ordered, p_positive), 1.0 / tau);
  const Var s_que = ag::scale(ag::matvec_const(negs, q_ordered), 1.0 / tau);
  const Var s_shuf = ag::scale(ag::dot(q_ordered, q_shuffled), 1.0 / tau);
  // The positive logit cancels in the difference of the two losses.
  const Var with_shuffled = ag::logsumexp(ag::concat_flat({s_pos, s_que, s_shuf}));
  const Var without = ag::logsumexp(ag::concat_flat({s_pos, s_que}));
  return ag::relu(ag::sub(with_shuffled, without));
}

std::vector<int64_t> sample_non_identity_permutation(int64_t k, Rng& rng) {
  GEBD_CHECK_ARG(k >= 2, "a non-identity permutation needs at least 2 slots");
  std::vector<int64_t> perm(static_cast<size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  bool identity = true;
  while (identity) {
    rng.shuffle(perm);
    identity = true;
    for (int64_t i = 0; i < k; ++i)
      if (perm[static_cast<size_t>(i)] != i) {
        identity = false;
        break;
      }
  }
  return perm;
}

void PretrainConfig::validate() const {
  encoder.validate();
  augment.validate();
  GEBD_CHECK_CFG(augment.out_side == encoder.input_side,
                 "augment output side must equal the encoder input side");
  GEBD_CHECK_CFG(queue_capacity >= 1, "queue capacity must be positive");
  GEBD_CHECK_CFG(temperature > 0.0, "temperature must be positive");
  GEBD_CHECK_CFG(batch_size >= 1, "batch size must be positive");
  GEBD_CHECK_CFG(clip_len >= 1, "clip length must be positive");
  GEBD_CHECK_CFG(base_lr > 0.0, "base learning rate must be positive");
  GEBD_CHECK_CFG(sgd_momentum >= 0.0 && sgd_momentum < 1.0, "sgd momentum must lie in [0, 1)");
  GEBD_CHECK_CFG(weight_decay >= 0.0, "weight decay must be nonnegative");
  GEBD_CHECK_CFG(warmup_steps >= 0 && total_steps >= 1 && warmup_steps <= total_steps,
                 "schedule needs 0 <= warmup_steps <= total_steps");
  GEBD_CHECK_CFG(key_momentum >= 0.0 && key_momentum <= 1.0,
                 "key momentum must lie in [0, 1]");
  for (double wgt : {weight_intra, weight_inter, weight_segment, weight_order})
    GEBD_CHECK_CFG(wgt >= 0.0, "loss weights must be nonnegative");
}

namespace {

PretrainConfig normalized(PretrainConfig cfg) {
  cfg.augment.out_side = cfg.encoder.input_side;
  cfg.validate();
  return cfg;
}

}  // namespace

PretrainController::PretrainController(const PretrainConfig& cfg)
    : cfg_(normalized(cfg)),
      dual_(cfg_.encoder, derive_seed(cfg_.seed, "encoder-init"), cfg_.key_momentum),
      opt_(dual_.query_params(), cfg_.base_lr, cfg_.sgd_momentum, cfg_.weight_decay,
           cfg_.warmup_steps, cfg_.total_steps),
      inter_queue_(cfg_.queue_capacity, cfg_.encoder.embedding_dim),
      segment_queue_(cfg_.queue_capacity, cfg_.encoder.embedding_dim) {}

PretrainController::VideoTerms PretrainController::video_terms(const data::VideoFrames& video,
                                                               uint64_t seed) {
  Rng rng(seed);
  const uint64_t triplet_seed = rng.next_u64();
  const uint64_t clip_seed = rng.next_u64();
  const int64_t side = cfg_.encoder.input_side;
  const double tau = cfg_.temperature;

  enc::EncodeOptions frame_opt;
  frame_opt.temporal_enabled = false;
  enc::EncodeOptions clip_opt;  // temporal path with time shift and motion fusion

  VideoTerms vt;

  // Frame tasks: one anchor through the query tower, three keys batched
  // through the key tower (frames are independent with temporal off).
  const FrameTriplet tr = sample_frame_triplet(video, cfg_.augment, triplet_seed);
  const Var anchor_in = Var::constant(tr.v1_anchor.reshaped({1, 3, side, side}));
  const Var anchor_feat = ag::row(dual_.query().encode(anchor_in, frame_opt).pooled, 0);
  const Var q_intra = dual_.query().project(anchor_feat, enc::HeadKind::intra);
  const Var q_inter = dual_.query().project(anchor_feat, enc::HeadKind::inter);

  const Var keys_in = Var::constant(stack_frames({tr.v1_positive, tr.v2, tr.v3}));
  const Var key_pooled = dual_.key().encode(keys_in, frame_opt).pooled;
  std::array<Var, 3> k_intra{}, k_inter{};
  for (int64_t i = 0; i < 3; ++i) {
    const Var feat = ag::row(key_pooled, i);
    k_intra[static_cast<size_t>(i)] = dual_.key().project(feat, enc::HeadKind::intra);
    k_inter[static_cast<size_t>(i)] = dual_.key().project(feat, enc::HeadKind::inter);
    vt.inter_keys.push_back(k_inter[static_cast<size_t>(i)].val());
  }
  vt.intra = intra_loss(q_intra, k_intra[0], k_intra[1], k_intra[2], tau);
  vt.inter = inter_loss(q_inter, k_inter, inter_queue_, tau);

  // Clip tasks: temporal modules stay on.
  const int64_t k = cfg_.encoder.segments;
  const ClipTuplePair cp = sample_clip_tuples(video, k, cfg_.clip_len, cfg_.augment, clip_seed);
  std::vector<Var> q_clips, p_clips;
  for (int64_t i = 0; i < k; ++i) {
    const Var a_in = Var::constant(cp.anchor_clips[static_cast<size_t>(i)]);
    const Var p_in = Var::constant(cp.positive_clips[static_cast<size_t>(i)]);
    q_clips.push_back(ag::mean_rows(dual_.query().encode(a_in, clip_opt).pooled));
    p_clips.push_back(ag::mean_rows(dual_.key().encode(p_in, clip_opt).pooled));
  }
  const Var q_seg = dual_.query().project(tuple_consensus(q_clips), enc::HeadKind::segment);
  const Var p_seg = dual_.key().project(tuple_consensus(p_clips), enc::HeadKind::segment);
  vt.segment = segment_loss(q_seg, p_seg, segment_queue_, tau);
  vt.segment_key = p_seg.val();

  const std::vector<int64_t> perm = sample_non_identity_permutation(k, rng);
  std::vector<Var> q_shuffled_clips;
  for (int64_t i = 0; i < k; ++i)
    q_shuffled_clips.push_back(q_clips[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
  const Var q_ord = dual_.query().project_order(ag::concat_flat(q_clips));
  const Var q_shuf = dual_.query().project_order(ag::concat_flat(q_shuffled_clips));
  const Var p_ord = dual_.key().project_order(ag::concat_flat(p_clips));
  vt.order = order_regularizer(q_ord, q_shuf, p_ord, segment_queue_, tau);
  return vt;
}

PretrainController::StepGraph PretrainController::compute(
    const std::vector<const data::VideoFrames*>& batch) {
  GEBD_CHECK_ARG(!batch.empty(), "pretrain step needs a nonempty batch");
  std::vector<Var> intras, inters, segments, orders;
  StepGraph g;
  for (size_t i = 0; i < batch.size(); ++i) {
    GEBD_CHECK_ARG(batch[i] != nullptr, "pretrain batch holds a null video");
    const uint64_t seed =
        derive_seed(cfg_.seed, "step:" + std::to_string(opt_.step_count()) + ":" + std::to_string(i));
    VideoTerms vt = video_terms(*batch[i], seed);
    intras.push_back(vt.intra);
    inters.push_back(vt.inter);
    segments.push_back(vt.segment);
    orders.push_back(vt.order);
    for (Tensor& key : vt.inter_keys) g.inter_keys.push_back(std::move(key));
    g.segment_keys.push_back(std::move(vt.segment_key));
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  g.intra = ag::scale(ag::add_n(intras), inv_b);
  g.inter = ag::scale(ag::add_n(inters), inv_b);
  g.segment = ag::scale(ag::add_n(segments), inv_b);
  g.order = ag::scale(ag::add_n(orders), inv_b);
  g.total = ag::add_n({ag::scale(g.intra, cfg_.weight_intra), ag::scale(g.inter, cfg_.weight_inter),
                   ag::scale(g.segment, cfg_.weight_segment), ag::scale(g.order, cfg_.weight_order)});
  return g;
}

PretextLossBundle PretrainController::StepGraph::bundle() const {
  PretextLossBundle b;
  b.intra = intra.val()[0];
  b.inter = inter.val()[0];
  b.segment = segment.val()[0];
  b.order = order.val()[0];
  b.total = total.val()[0];
  return b;
}

PretextLossBundle PretrainController::step(const std::vector<const data::VideoFrames*>& batch) {
  StepGraph g = compute(batch);
  const PretextLossBundle b = g.bundle();
  if (!std::isfinite(b.total) || !std::isfinite(b.intra) || !std::isfinite(b.inter) ||
      !std::isfinite(b.segment) || !std::isfinite(b.order)) {
    std::ostringstream diag;
    diag << "non-finite pretext loss at step " << opt_.step_count() << ": intra=" << b.intra
         << " inter=" << b.inter << " segment=" << b.segment << " order=" << b.order;
    throw Error(ErrorCode::runtime_error, diag.str());
  }

  dual_.query_params().zero_grad();
  g.total.backward();
  opt_.step();
  dual_.momentum_update();
  inter_queue_.push(g.inter_keys);
  segment_queue_.push(g.segment_keys);
  return b;
}

void PretrainController::warm_queues(const std::vector<const data::VideoFrames*>& videos) {
  GEBD_CHECK_ARG(!videos.empty(), "queue warm-up needs at least one video");
  enc::EncodeOptions frame_opt;
  frame_opt.temporal_enabled = false;
  enc::EncodeOptions clip_opt;
  for (size_t i = 0; i < videos.size(); ++i) {
    GEBD_CHECK_ARG(videos[i] != nullptr, "queue warm-up holds a null video");
    Rng rng(derive_seed(cfg_.seed, "warm:" + std::to_string(i)));
    const uint64_t triplet_seed = rng.next_u64();
    const uint64_t clip_seed = rng.next_u64();

    const FrameTriplet tr = sample_frame_triplet(*videos[i], cfg_.augment, triplet_seed);
    const Var keys_in = Var::constant(stack_frames({tr.v1_positive, tr.v2, tr.v3}));
    const Var key_pooled = dual_.key().encode(keys_in, frame_opt).pooled;
    std::vector<Tensor> inter_keys;
    for (int64_t j = 0; j < 3; ++j)
      inter_keys.push_back(dual_.key().project(ag::row(key_pooled, j), enc::HeadKind::inter).val());
    inter_queue_.push(inter_keys);

    const ClipTuplePair cp =
        sample_clip_tuples(*videos[i], cfg_.encoder.segments, cfg_.clip_len, cfg_.augment, clip_seed);
    std::vector<Var> p_clips;
    for (const Tensor& clip : cp.positive_clips)
      p_clips.push_back(ag::mean_rows(dual_.key().encode(Var::constant(clip), clip_opt).pooled));
    const Var p_seg = dual_.key().project(tuple_consensus(p_clips), enc::HeadKind::segment);
    segment_queue_.push({p_seg.val()});
  }
}

}  // namespace gebd::pretext
