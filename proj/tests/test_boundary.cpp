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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "gebd/boundary.hpp"
#include "testutil.hpp"

using namespace gebd;
using ag::Var;
using boundary::BoundaryConfig;
using boundary::BoundaryModel;
using boundary::CandidateWindow;
using boundary::FinetuneConfig;
using boundary::FinetuneResult;
using boundary::LabeledVideo;

namespace {

data::VideoFrames make_video(const std::string& id, int64_t t, int64_t h, int64_t w,
                             uint64_t seed) {
  data::VideoFrames v;
  v.video_id = id;
  v.t = t;
  v.h = h;
  v.w = w;
  v.fps = 10.0;
  v.rgb.resize(static_cast<size_t>(t * 3 * h * w));
  Rng rng(seed);
  for (auto& b : v.rgb) b = static_cast<uint8_t>(rng.uniform_int(256));
  return v;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  REQUIRE(false);
  return ErrorCode::runtime_error;
}

// Small context and hidden width keep training-path tests fast; the window
// geometry itself is exercised at the default shape elsewhere.
BoundaryConfig small_config() {
  BoundaryConfig cfg;
  cfg.window = 2;
  cfg.dilation = 3;
  cfg.candidate_stride = 3;
  cfg.hidden = 16;
  return cfg;
}

bool stores_equal(const nn::ParamStore& a, const nn::ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.entries().size(); ++i) {
    const auto& [an, av] = a.entries()[i];
    const auto& [bn, bv] = b.entries()[i];
    if (an != bn || !(av.val().shape() == bv.val().shape())) return false;
    for (int64_t k = 0; k < av.numel(); ++k)
      if (av.val()[k] != bv.val()[k]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("candidate windows: dilated context with edge clamping") {
  // Interior candidate: exact {-15..-3, +3..+15} offsets in ascending order.
  auto windows = boundary::build_candidate_windows(100, 5, 3, 50, false);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].candidate_index == 0);
  CHECK(windows[1].candidate_index == 50);
  CHECK(windows[1].context_indices ==
        std::vector<int64_t>{35, 38, 41, 44, 47, 53, 56, 59, 62, 65});
  // Leading candidate: the before-half clamps onto frame 0.
  CHECK(windows[0].context_indices == std::vector<int64_t>{0, 0, 0, 0, 0, 3, 6, 9, 12, 15});

  SUBCASE("every candidate of a short video matches the clamp formula") {
    const int64_t t = 37, w = 5, m = 3;
    auto all = boundary::build_candidate_windows(t, w, m, 3, false);
    REQUIRE(all.size() == 13);
    for (const auto& cw : all) {
      REQUIRE(cw.context_indices.size() == 10);
      std::vector<int64_t> expect;
      for (int64_t j = -w; j <= w; ++j) {
        if (j == 0) continue;
        expect.push_back(std::clamp<int64_t>(cw.candidate_index + j * m, 0, t - 1));
      }
      CHECK(cw.context_indices == expect);
      CHECK(cw.label == 0.0);
    }
  }

  SUBCASE("include_candidate inserts the candidate between the halves") {
    auto with = boundary::build_candidate_windows(100, 2, 3, 50, true);
    REQUIRE(with.size() == 2);
    CHECK(with[1].context_indices == std::vector<int64_t>{44, 47, 50, 53, 56});
  }

  SUBCASE("interior windows translate with the candidate") {
    auto a = boundary::build_candidate_windows(200, 4, 3, 3, false);
    for (size_t i = 20; i < 40; ++i) {
      for (size_t k = 0; k < a[i].context_indices.size(); ++k)
        CHECK(a[i + 1].context_indices[k] == a[i].context_indices[k] + 3);
    }
  }

  SUBCASE("invalid geometry") {
    CHECK(code_of([] { boundary::build_candidate_windows(0, 5, 3, 3, false); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::build_candidate_windows(10, 0, 3, 3, false); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::build_candidate_windows(10, 5, 0, 3, false); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::build_candidate_windows(10, 5, 3, 0, false); }) ==
          ErrorCode::invalid_argument);
  }
}

TEST_CASE("soft labels: truncated max-of-Gaussians") {
  auto track = boundary::soft_labels({10}, 30, 3.0);
  REQUIRE(track.labels.size() == 30);
  CHECK(track.labels[10] == 1.0);
  CHECK(track.labels[13] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(track.labels[7] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // |f - b| = 12 = 4 sigma is the last nonzero tap; 13 frames out is hard zero.
  CHECK(track.labels[22] == doctest::Approx(std::exp(-8.0)).epsilon(1e-12));
  CHECK(track.labels[23] == 0.0);
  CHECK(track.labels[0] == doctest::Approx(std::exp(-100.0 / 18.0)).epsilon(1e-12));
  CHECK(track.labels[29] == 0.0);

  SUBCASE("overlapping boundaries take the pointwise max") {
    auto two = boundary::soft_labels({10, 14}, 30, 3.0);
    CHECK(two.labels[12] == doctest::Approx(std::exp(-4.0 / 18.0)).epsilon(1e-12));
    CHECK(two.labels[10] == 1.0);
    CHECK(two.labels[14] == 1.0);
    CHECK(two.labels[11] == doctest::Approx(std::exp(-1.0 / 18.0)).epsilon(1e-12));
  }

  SUBCASE("no boundaries gives the zero track") {
    auto zero = boundary::soft_labels({}, 12, 3.0);
    for (double v : zero.labels) CHECK(v == 0.0);
  }

  SUBCASE("sigma zero degenerates to the indicator") {
    auto ind = boundary::soft_labels({3, 7}, 10, 0.0);
    for (int64_t f = 0; f < 10; ++f) CHECK(ind.labels[f] == ((f == 3 || f == 7) ? 1.0 : 0.0));
  }

  SUBCASE("labels grow with sigma and stay exactly one at boundaries") {
    const std::vector<int64_t> bs = {7, 20};
    const std::vector<double> sigmas = {0.5, 1.0, 2.0, 3.0, 5.0};
    std::vector<double> prev(40, -1.0);
    for (double s : sigmas) {
      auto tr = boundary::soft_labels(bs, 40, s);
      CHECK(tr.labels[7] == 1.0);
      CHECK(tr.labels[20] == 1.0);
      for (int64_t f = 0; f < 40; ++f) {
        CHECK(tr.labels[f] >= prev[f]);
        prev[f] = tr.labels[f];
      }
    }
  }

  SUBCASE("invalid inputs") {
    CHECK(code_of([] { boundary::soft_labels({5}, 10, -1.0); }) == ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::soft_labels({10}, 10, 3.0); }) == ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::soft_labels({-1}, 10, 3.0); }) == ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::soft_labels({0}, 0, 3.0); }) == ErrorCode::invalid_argument);
  }
}

TEST_CASE("boundary frames from timestamps: round, validate, dedupe") {
  auto frames = boundary::boundary_frames_from_sec({1.04, 0.0, 1.02}, 10.0, 60);
  CHECK(frames == std::vector<int64_t>{0, 10});
  // 5.0 s at 10 fps rounds to frame 50: first index past a 50-frame video.
  CHECK(code_of([] { boundary::boundary_frames_from_sec({5.0}, 10.0, 50); }) ==
        ErrorCode::invalid_argument);
  CHECK(boundary::boundary_frames_from_sec({5.0}, 10.0, 51) == std::vector<int64_t>{50});
  CHECK(code_of([] { boundary::boundary_frames_from_sec({-0.2}, 10.0, 50); }) ==
        ErrorCode::invalid_argument);
  CHECK(code_of([] { boundary::boundary_frames_from_sec({1.0}, 0.0, 50); }) ==
        ErrorCode::invalid_argument);
}

TEST_CASE("label assignment onto candidate windows") {
  auto windows = boundary::build_candidate_windows(20, 2, 3, 3, false);  // candidates 0,3,...,18

  SUBCASE("soft assignment samples the track at the candidate") {
    auto track = boundary::soft_labels({7}, 20, 3.0);
    boundary::assign_soft_labels(windows, track);
    for (const auto& w : windows)
      CHECK(w.label == track.labels[static_cast<size_t>(w.candidate_index)]);
    auto short_track = boundary::soft_labels({2}, 10, 3.0);
    CHECK(code_of([&] { boundary::assign_soft_labels(windows, short_track); }) ==
          ErrorCode::invalid_argument);
  }

  SUBCASE("hard assignment marks the nearest candidate once per boundary") {
    boundary::assign_hard_labels(windows, {7});
    for (const auto& w : windows) CHECK(w.label == (w.candidate_index == 6 ? 1.0 : 0.0));
    // Frame 7 sits between candidates 6 and 9; 6 is strictly nearer.
  }

  SUBCASE("equidistant boundaries pick the earlier candidate") {
    auto even = boundary::build_candidate_windows(10, 1, 1, 2, false);  // candidates 0,2,...,8
    boundary::assign_hard_labels(even, {1});
    CHECK(even[0].label == 1.0);  // frames 0 and 2 tie; earliest wins
    CHECK(even[1].label == 0.0);
  }

  SUBCASE("hard labels on candidate boundaries equal the sampled indicator") {
    boundary::assign_hard_labels(windows, {6, 12});
    auto ind = boundary::soft_labels({6, 12}, 20, 0.0);
    for (const auto& w : windows)
      CHECK(w.label == ind.labels[static_cast<size_t>(w.candidate_index)]);
  }

  SUBCASE("no boundaries clears every label") {
    for (auto& w : windows) w.label = 0.7;
    boundary::assign_hard_labels(windows, {});
    for (const auto& w : windows) CHECK(w.label == 0.0);
  }
}

TEST_CASE("gather window frames: indexing, clamping, resize") {
  auto video = make_video("g", 24, 32, 32, 11);
  auto windows = boundary::build_candidate_windows(24, 2, 3, 3, false);

  SUBCASE("native resolution copies model inputs verbatim") {
    const auto& w = windows[4];  // candidate 12, context {6,9,15,18}
    Tensor got = boundary::gather_window_frames(video, w, 32);
    REQUIRE(got.shape() == std::vector<int64_t>{4, 3, 32, 32});
    for (size_t i = 0; i < w.context_indices.size(); ++i) {
      Tensor want = data::to_model_input(video, w.context_indices[i]);
      for (int64_t k = 0; k < want.numel(); ++k)
        CHECK(got[static_cast<int64_t>(i) * want.numel() + k] == want[k]);
    }
  }

  SUBCASE("clamped edge window repeats frame zero") {
    const auto& w = windows[0];  // context {0,0,3,6}
    Tensor got = boundary::gather_window_frames(video, w, 32);
    for (int64_t k = 0; k < 3 * 32 * 32; ++k) CHECK(got[k] == got[3 * 32 * 32 + k]);
  }

  SUBCASE("other resolutions resize; constants stay constant") {
    data::VideoFrames flat;
    flat.video_id = "flat";
    flat.t = 24;
    flat.h = 48;
    flat.w = 64;
    flat.fps = 10.0;
    flat.rgb.assign(static_cast<size_t>(24 * 3 * 48 * 64), 200);
    Tensor got = boundary::gather_window_frames(flat, windows[4], 32);
    REQUIRE(got.shape() == std::vector<int64_t>{4, 3, 32, 32});
    const double want = 200.0 / 255.0 - 0.5;
    for (int64_t k = 0; k < got.numel(); ++k) CHECK(got[k] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("postprocess: threshold, clustering, minimum gap") {
  SUBCASE("nothing above threshold (strict) gives no boundaries") {
    CHECK(boundary::postprocess({0.5, 0.2, 0.5}, {0, 30, 60}, 30.0).empty());
    CHECK(boundary::postprocess({}, {}, 30.0).empty());
  }

  SUBCASE("a cluster emits its probability maximum") {
    auto out = boundary::postprocess({0.6, 0.8}, {10, 12}, 30.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 12.0 / 30.0);
  }

  SUBCASE("equal probabilities emit the earliest member") {
    auto out = boundary::postprocess({0.7, 0.7}, {10, 12}, 30.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 10.0 / 30.0);
  }

  SUBCASE("separated detections both survive") {
    auto out = boundary::postprocess({0.9, 0.8}, {10, 70}, 30.0);
    CHECK(out == std::vector<double>{10.0 / 30.0, 70.0 / 30.0});
  }

  SUBCASE("a chain of near proposals collapses onto its strongest member") {
    // Frames 0 and 31 are each within 1 s of frame 29 but not of each other;
    // the strongest proposal suppresses both sides of the chain.
    auto out = boundary::postprocess({0.6, 0.99, 0.9}, {0, 29, 31}, 30.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == 29.0 / 30.0);
  }

  SUBCASE("zero window keeps every survivor") {
    auto out = boundary::postprocess({0.9, 0.8, 0.7}, {1, 2, 3}, 30.0, 0.5, 0.0);
    CHECK(out.size() == 3);
  }

  SUBCASE("invalid inputs") {
    CHECK(code_of([] { boundary::postprocess({0.5}, {0, 1}, 30.0); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::postprocess({0.5, 0.6}, {3, 3}, 30.0); }) ==
          ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::postprocess({0.5}, {0}, 0.0); }) == ErrorCode::invalid_argument);
    CHECK(code_of([] { boundary::postprocess({0.5}, {0}, 30.0, 0.5, -1.0); }) ==
          ErrorCode::invalid_argument);
  }

  SUBCASE("random tracks: subset, minimum gap, threshold monotonicity") {
    Rng rng(404);
    for (int rep = 0; rep < 1000; ++rep) {
      const double fps = 5.0 + rng.uniform(0.0, 25.0);
      const double window_sec = std::vector<double>{0.5, 1.0, 2.0}[rng.uniform_int(3)];
      std::vector<int64_t> cands;
      std::vector<double> probs;
      int64_t f = 0;
      const int64_t n = 10 + rng.uniform_int(40);
      for (int64_t i = 0; i < n; ++i) {
        cands.push_back(f);
        probs.push_back(rng.uniform());
        f += 1 + rng.uniform_int(5);
      }
      const double thr = rng.uniform();
      auto out = boundary::postprocess(probs, cands, fps, thr, window_sec);

      std::set<double> allowed;
      for (size_t i = 0; i < cands.size(); ++i)
        if (probs[i] > thr) allowed.insert(static_cast<double>(cands[i]) / fps);
      for (double b : out) CHECK(allowed.count(b) == 1);
      for (size_t i = 1; i < out.size(); ++i) {
        CHECK(out[i] > out[i - 1]);
        CHECK(out[i] - out[i - 1] >= window_sec);
      }

      const double thr2 = thr + (1.0 - thr) * rng.uniform();
      auto out2 = boundary::postprocess(probs, cands, fps, thr2, window_sec);
      std::set<double> base(out.begin(), out.end());
      CHECK(out2.size() <= out.size());
      for (double b : out2) CHECK(base.count(b) == 1);
    }
  }
}

TEST_CASE("boundary model: shapes, determinism, checkpoints") {
  BoundaryConfig cfg = small_config();
  BoundaryModel model(cfg, 5);
  auto video = make_video("m", 24, 32, 32, 21);
  auto windows = boundary::build_candidate_windows(24, cfg.window, cfg.dilation,
                                                   cfg.candidate_stride, false);
  Tensor frames = boundary::gather_window_frames(video, windows[3], 32);

  SUBCASE("classifier dimensions follow the context size") {
    CHECK(model.params().get("cls.fc1.weight").shape() ==
          std::vector<int64_t>{16, 4 * 128});
    CHECK(model.params().get("cls.fc2.weight").shape() == std::vector<int64_t>{1, 16});
    Var logit = model.window_logit(Var::constant(frames));
    CHECK(logit.shape() == std::vector<int64_t>{1});
    BoundaryConfig with = cfg;
    with.include_candidate = true;
    BoundaryModel wm(with, 5);
    CHECK(wm.params().get("cls.fc1.weight").shape() ==
          std::vector<int64_t>{16, 5 * 128});
    CHECK(code_of([&] { wm.predict(frames); }) == ErrorCode::invalid_argument);
  }

  SUBCASE("same seed, same parameters, same prediction") {
    BoundaryModel twin(cfg, 5);
    CHECK(stores_equal(model.params(), twin.params()));
    double a = model.predict(frames);
    double b = twin.predict(frames);
    CHECK(a == b);
    CHECK(a > 0.0);
    CHECK(a < 1.0);
    BoundaryModel other(cfg, 6);
    CHECK(!stores_equal(model.params(), other.params()));
  }

  SUBCASE("fine-tune checkpoints round-trip exactly") {
    ckpt::Checkpoint c = model.to_checkpoint();
    CHECK(c.meta.at("stage") == "finetune");
    for (const auto& [name, t] : c.tensors)
      CHECK((name.rfind("query.", 0) == 0 || name.rfind("cls.", 0) == 0));
    BoundaryModel back = BoundaryModel::from_checkpoint(c);
    CHECK(stores_equal(model.params(), back.params()));
    CHECK(model.predict(frames) == back.predict(frames));
    CHECK(back.config().window == cfg.window);
    CHECK(back.config().hidden == cfg.hidden);
  }

  SUBCASE("pretrained encoder weights load; the classifier stays fresh") {
    enc::DualEncoder dual(cfg.encoder, 99, 0.99);
    ckpt::Checkpoint pre = ckpt::make_encoder_checkpoint(dual);
    Tensor cls_before = model.params().get("cls.fc1.weight").val();
    model.load_pretrained_encoder(pre);
    for (const auto& [name, v] : dual.query_params().entries()) {
      const Tensor& got = model.params().get(name).val();
      for (int64_t k = 0; k < got.numel(); ++k) CHECK(got[k] == v.val()[k]);
    }
    const Tensor& cls_after = model.params().get("cls.fc1.weight").val();
    for (int64_t k = 0; k < cls_after.numel(); ++k) CHECK(cls_after[k] == cls_before[k]);
  }

  SUBCASE("pretrained loading rejects mismatched configs and missing tensors") {
    enc::EncoderConfig other = cfg.encoder;
    other.embedding_dim = 16;
    enc::DualEncoder dual(other, 99, 0.99);
    ckpt::Checkpoint pre = ckpt::make_encoder_checkpoint(dual);
    CHECK(code_of([&] { model.load_pretrained_encoder(pre); }) == ErrorCode::invalid_argument);

    enc::DualEncoder good(cfg.encoder, 99, 0.99);
    ckpt::Checkpoint full = ckpt::make_encoder_checkpoint(good);
    ckpt::Checkpoint truncated;
    truncated.meta = full.meta;
    for (const auto& [name, t] : full.tensors)
      if (name != "query.stem.conv.weight") truncated.add(name, t);
    CHECK(code_of([&] { model.load_pretrained_encoder(truncated); }) ==
          ErrorCode::invalid_argument);
  }
}

TEST_CASE("detect boundaries: candidate grid and postprocess wiring") {
  BoundaryConfig cfg = small_config();
  BoundaryModel model(cfg, 3);
  auto video = make_video("d", 24, 32, 32, 31);
  auto pred = boundary::detect_boundaries(model, video, 0.4, 1.0);
  CHECK(pred.video_id == "d");
  CHECK(pred.fps == 10.0);
  CHECK(pred.threshold == 0.4);
  CHECK(pred.candidate_frames == std::vector<int64_t>{0, 3, 6, 9, 12, 15, 18, 21});
  REQUIRE(pred.probabilities.size() == 8);
  for (double p : pred.probabilities) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK(pred.boundaries_sec ==
        boundary::postprocess(pred.probabilities, pred.candidate_frames, 10.0, 0.4, 1.0));
}

TEST_CASE("finetune: balanced batches, early stopping, determinism") {
  data::SceneProfile profile;
  profile.length = 24;
  std::vector<data::GeneratedVideo> train_videos, val_videos;
  std::vector<LabeledVideo> train, val;
  for (int i = 0; i < 4; ++i)
    train_videos.push_back(
        data::generate_synthetic_video(data::random_scene_spec("t" + std::to_string(i), 700 + i,
                                                               profile)));
  for (int i = 0; i < 2; ++i)
    val_videos.push_back(
        data::generate_synthetic_video(data::random_scene_spec("v" + std::to_string(i), 800 + i,
                                                               profile)));
  for (const auto& g : train_videos) train.push_back({&g.frames, g.annotation.annotators[0]});
  for (const auto& g : val_videos) val.push_back({&g.frames, g.annotation.annotators[0]});

  FinetuneConfig fc;
  fc.batch_size = 4;
  fc.base_lr = 0.01;
  fc.max_epochs = 3;
  fc.patience = 3;
  fc.max_steps_per_epoch = 6;
  fc.seed = 42;

  BoundaryModel model(small_config(), 5);
  FinetuneResult r = finetune(model, train, val, fc);

  SUBCASE("loss falls and the trace is fully recorded") {
    REQUIRE(r.epochs_run >= 1);
    CHECK(r.step_losses.size() == static_cast<size_t>(6 * r.epochs_run));
    CHECK(r.epoch_mean_loss.size() == static_cast<size_t>(r.epochs_run));
    CHECK(r.epoch_val_f1.size() == static_cast<size_t>(r.epochs_run));
    for (double l : r.step_losses) CHECK(std::isfinite(l));
    CHECK(r.epoch_mean_loss.back() < r.epoch_mean_loss.front());
  }

  SUBCASE("every batch carries exactly ceil(B/2) positives") {
    REQUIRE(!r.batch_positive_counts.empty());
    for (int64_t c : r.batch_positive_counts) CHECK(c == 2);
  }

  SUBCASE("the returned snapshot is the validation argmax, restored into the model") {
    REQUIRE(r.best_epoch >= 0);
    size_t argmax = 0;
    for (size_t i = 1; i < r.epoch_val_f1.size(); ++i)
      if (r.epoch_val_f1[i] > r.epoch_val_f1[argmax]) argmax = i;
    CHECK(r.best_epoch == static_cast<int64_t>(argmax));
    CHECK(r.best_val_f1 == r.epoch_val_f1[argmax]);
    CHECK(r.best.meta.at("epoch") == r.best_epoch);
    BoundaryModel best = BoundaryModel::from_checkpoint(r.best);
    CHECK(stores_equal(model.params(), best.params()));
  }

  SUBCASE("identical seeds reproduce the run bitwise") {
    BoundaryModel twin(small_config(), 5);
    FinetuneResult r2 = finetune(twin, train, val, fc);
    CHECK(r2.step_losses == r.step_losses);
    CHECK(r2.epoch_val_f1 == r.epoch_val_f1);
    CHECK(r2.best_epoch == r.best_epoch);
    CHECK(stores_equal(model.params(), twin.params()));
  }
}

TEST_CASE("finetune: early stop halts after patience epochs without a best") {
  data::SceneProfile profile;
  profile.length = 24;
  auto tv = data::generate_synthetic_video(data::random_scene_spec("t", 901, profile));
  auto vv = data::generate_synthetic_video(data::random_scene_spec("v", 902, profile));
  std::vector<LabeledVideo> train = {{&tv.frames, tv.annotation.annotators[0]}};
  std::vector<LabeledVideo> val = {{&vv.frames, vv.annotation.annotators[0]}};

  FinetuneConfig fc;
  fc.batch_size = 4;
  fc.base_lr = 1e-8;  // effectively frozen: no epoch can beat the first
  fc.max_epochs = 5;
  fc.patience = 2;
  fc.max_steps_per_epoch = 2;
  fc.seed = 1;

  BoundaryModel model(small_config(), 5);
  FinetuneResult r = finetune(model, train, val, fc);
  CHECK(r.best_epoch == 0);
  CHECK(r.epochs_run == 3);  // epochs 1 and 2 bring no improvement, then stop
}

TEST_CASE("finetune: frozen encoder trains the classifier only") {
  data::SceneProfile profile;
  profile.length = 24;
  auto tv = data::generate_synthetic_video(data::random_scene_spec("t", 911, profile));
  auto vv = data::generate_synthetic_video(data::random_scene_spec("v", 912, profile));
  std::vector<LabeledVideo> train = {{&tv.frames, tv.annotation.annotators[0]}};
  std::vector<LabeledVideo> val = {{&vv.frames, vv.annotation.annotators[0]}};

  FinetuneConfig fc;
  fc.batch_size = 4;
  fc.max_epochs = 1;
  fc.max_steps_per_epoch = 3;
  fc.freeze_encoder = true;
  fc.seed = 2;

  BoundaryModel model(small_config(), 5);
  BoundaryModel reference(small_config(), 5);
  finetune(model, train, val, fc);
  bool cls_changed = false;
  for (const auto& [name, v] : model.params().entries()) {
    const Tensor& want = reference.params().get(name).val();
    if (name.rfind("cls.", 0) == 0) {
      for (int64_t k = 0; k < want.numel(); ++k)
        if (v.val()[k] != want[k]) cls_changed = true;
    } else {
      for (int64_t k = 0; k < want.numel(); ++k) CHECK(v.val()[k] == want[k]);
    }
    CHECK(v.node()->requires_grad);
  }
  CHECK(cls_changed);
}

TEST_CASE("finetune: degenerate corpora are rejected") {
  data::SceneProfile profile;
  profile.length = 24;
  auto tv = data::generate_synthetic_video(data::random_scene_spec("t", 921, profile));
  auto vv = data::generate_synthetic_video(data::random_scene_spec("v", 922, profile));
  std::vector<LabeledVideo> val = {{&vv.frames, vv.annotation.annotators[0]}};
  FinetuneConfig fc;
  fc.batch_size = 4;
  BoundaryModel model(small_config(), 5);

  SUBCASE("no boundaries means no positives") {
    std::vector<LabeledVideo> train = {{&tv.frames, {}}};
    CHECK(code_of([&] { finetune(model, train, val, fc); }) == ErrorCode::invalid_argument);
  }

  SUBCASE("a single all-positive candidate means no negatives") {
    auto tiny = make_video("tiny", 3, 32, 32, 5);
    std::vector<LabeledVideo> train = {{&tiny, {0.0}}};
    CHECK(code_of([&] { finetune(model, train, val, fc); }) == ErrorCode::invalid_argument);
  }

  SUBCASE("empty sets") {
    std::vector<LabeledVideo> train = {{&tv.frames, tv.annotation.annotators[0]}};
    CHECK(code_of([&] { finetune(model, {}, val, fc); }) == ErrorCode::invalid_argument);
    CHECK(code_of([&] { finetune(model, train, {}, fc); }) == ErrorCode::invalid_argument);
  }
}
