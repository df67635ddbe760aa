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

#include "gebd/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "gebd/boundary.hpp"
#include "gebd/checkpoint.hpp"
#include "gebd/common.hpp"
#include "gebd/eval.hpp"
#include "gebd/jsonio.hpp"
#include "gebd/pretext.hpp"

namespace gebd::run {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shortest round-trip decimal; the same encoder nlohmann uses, so CSV cells
// and JSON fields agree byte-for-byte across reruns.
std::string fmt(double v) { return json(v).dump(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream ofs(path, std::ios::binary | std::ios::trunc);
  GEBD_CHECK_IO(ofs.good(), "cannot open for writing: " + path);
  ofs << text;
  ofs.flush();
  GEBD_CHECK_IO(ofs.good(), "write failed: " + path);
}

// Creates the directory that will hold out_path and returns it ("." when the
// path has no directory component).
std::string ensure_parent(const std::string& out_path) {
  fs::path parent = fs::path(out_path).parent_path();
  if (parent.empty()) return ".";
  fs::create_directories(parent);
  return parent.string();
}

std::string pad4(int64_t n) {
  std::string s = std::to_string(n);
  while (s.size() < 4) s.insert(s.begin(), '0');
  return s;
}

std::vector<const data::VideoFrames*> frame_ptrs(const std::vector<CorpusVideo>& corpus) {
  std::vector<const data::VideoFrames*> ptrs;
  ptrs.reserve(corpus.size());
  for (const CorpusVideo& v : corpus) ptrs.push_back(&v.frames);
  return ptrs;
}

std::vector<boundary::LabeledVideo> labeled(const std::vector<CorpusVideo>& corpus) {
  std::vector<boundary::LabeledVideo> out;
  out.reserve(corpus.size());
  for (const CorpusVideo& v : corpus) out.push_back({&v.frames, v.boundaries_sec});
  return out;
}

ckpt::Checkpoint encoder_checkpoint(pretext::PretrainController& ctl, int64_t epoch,
                                    uint64_t root_seed) {
  ckpt::Checkpoint c = ckpt::make_encoder_checkpoint(ctl.dual());
  c.meta["stage"] = "pretrain";
  c.meta["epoch"] = epoch;
  c.meta["steps"] = ctl.step_count();
  c.meta["seed"] = root_seed;
  ckpt::put_optimizer(c, ctl.optimizer());
  return c;
}

}  // namespace

std::vector<CorpusVideo> load_corpus(const std::string& manifest_path, const std::string& split) {
  GEBD_CHECK_ARG(split == "all" || split == "train" || split == "val",
                 "split must be all, train, or val: " + split);
  data::CorpusManifest manifest = data::load_manifest(manifest_path);
  std::vector<eval::AnnotationSet> sets =
      eval::load_annotations_json((fs::path(manifest.root) / "annotations.json").string());
  std::map<std::string, const eval::AnnotationSet*> by_id;
  for (const eval::AnnotationSet& s : sets) by_id[s.video_id] = &s;

  std::vector<CorpusVideo> corpus;
  for (const data::ManifestEntry& e : manifest.entries) {
    if (split != "all" && e.split != split) continue;
    auto it = by_id.find(e.video_id);
    GEBD_CHECK_IO(it != by_id.end(), "annotations.json is missing video " + e.video_id);
    CorpusVideo v;
    v.frames = data::load_video_frames((fs::path(manifest.root) / e.frames_path).string());
    GEBD_CHECK_IO(v.frames.t == e.num_frames,
                  "frame count mismatch for " + e.video_id + ": manifest says " +
                      std::to_string(e.num_frames) + ", directory has " +
                      std::to_string(v.frames.t));
    const eval::AnnotationSet& set = *it->second;
    GEBD_CHECK_IO(!set.annotators.empty(), "empty annotator list for " + e.video_id);
    v.boundaries_sec = set.annotators[static_cast<size_t>(eval::select_consistent_annotation(set))];
    v.boundary_tags = e.boundary_tags;
    v.split = e.split;
    corpus.push_back(std::move(v));
  }
  return corpus;
}

json gen_synth(cfg::Config c, const std::string& out_dir) {
  c.finalize();
  fs::create_directories(out_dir);
  data::GenSynthOptions options = cfg::gen_options(c);
  data::CorpusManifest manifest = data::generate_corpus(out_dir, options);
  c.write_resolved((fs::path(out_dir) / "resolved_config.json").string());

  int64_t train = 0, val = 0;
  for (const data::ManifestEntry& e : manifest.entries) (e.split == "train" ? train : val) += 1;
  json summary;
  summary["command"] = "gen-synth";
  summary["manifest"] = (fs::path(out_dir) / "manifest.json").string();
  summary["videos"] = static_cast<int64_t>(manifest.entries.size());
  summary["train"] = train;
  summary["val"] = val;
  return summary;
}

json pretrain(cfg::Config c, const std::string& out_dir) {
  c.finalize();
  const std::string manifest = c.get_string("corpus.manifest");
  GEBD_CHECK_CFG(!manifest.empty(), "pretrain requires corpus.manifest");
  std::vector<CorpusVideo> corpus = load_corpus(manifest, "train");

  const int64_t batch = c.get_int("pretrain.batch_size");
  const int64_t n = static_cast<int64_t>(corpus.size());
  GEBD_CHECK_CFG(n >= batch, "pretrain needs at least pretrain.batch_size train videos, got " +
                                 std::to_string(n));
  const int64_t steps_per_epoch = n / batch;
  pretext::PretrainConfig pcfg = cfg::pretrain_config(c, steps_per_epoch);
  const int64_t epochs = c.get_int("pretrain.epochs");

  fs::create_directories(out_dir);
  c.write_resolved((fs::path(out_dir) / "resolved_config.json").string());

  pretext::PretrainController ctl(pcfg);
  ctl.warm_queues(frame_ptrs(corpus));

  std::ostringstream csv;
  csv << "step,L_intra,L_inter,L_segment,L_order,L_total\n";
  pretext::PretextLossBundle last;
  Rng order_rng(derive_seed(pcfg.seed, "order"));
  std::vector<size_t> perm(static_cast<size_t>(n));
  int64_t step = 0;
  for (int64_t epoch = 0; epoch < epochs; ++epoch) {
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng er = order_rng.fork("epoch:" + std::to_string(epoch));
    er.shuffle(perm);
    for (int64_t b = 0; b < steps_per_epoch; ++b) {
      std::vector<const data::VideoFrames*> batch_ptrs;
      batch_ptrs.reserve(static_cast<size_t>(batch));
      for (int64_t j = 0; j < batch; ++j)
        batch_ptrs.push_back(&corpus[perm[static_cast<size_t>(b * batch + j)]].frames);
      last = ctl.step(batch_ptrs);
      csv << step << ',' << fmt(last.intra) << ',' << fmt(last.inter) << ',' << fmt(last.segment)
          << ',' << fmt(last.order) << ',' << fmt(last.total) << '\n';
      ++step;
    }
    ckpt::save_checkpoint(
        (fs::path(out_dir) / ("checkpoint_epoch_" + pad4(epoch) + ".gebd")).string(),
        encoder_checkpoint(ctl, epoch, c.seed()));
  }
  write_text((fs::path(out_dir) / "losses.csv").string(), csv.str());
  const std::string final_path = (fs::path(out_dir) / "encoder.gebd").string();
  ckpt::save_checkpoint(final_path, encoder_checkpoint(ctl, epochs - 1, c.seed()));

  json summary;
  summary["command"] = "pretrain";
  summary["checkpoint"] = final_path;
  summary["epochs"] = epochs;
  summary["steps"] = step;
  summary["steps_per_epoch"] = steps_per_epoch;
  summary["final"] = {{"L_intra", last.intra},
                      {"L_inter", last.inter},
                      {"L_segment", last.segment},
                      {"L_order", last.order},
                      {"L_total", last.total}};
  return summary;
}

json finetune(cfg::Config c, const std::string& init_ckpt, const std::string& out_dir) {
  c.finalize();
  const std::string manifest = c.get_string("corpus.manifest");
  GEBD_CHECK_CFG(!manifest.empty(), "finetune requires corpus.manifest");
  std::vector<CorpusVideo> train = load_corpus(manifest, "train");
  std::vector<CorpusVideo> val = load_corpus(manifest, "val");

  boundary::BoundaryModel model(cfg::boundary_config(c), c.seed());
  if (!init_ckpt.empty()) model.load_pretrained_encoder(ckpt::load_checkpoint(init_ckpt));

  fs::create_directories(out_dir);
  c.write_resolved((fs::path(out_dir) / "resolved_config.json").string());

  boundary::FinetuneResult result =
      boundary::finetune(model, labeled(train), labeled(val), cfg::finetune_config(c));

  const std::string model_path = (fs::path(out_dir) / "model.gebd").string();
  ckpt::save_checkpoint(model_path, result.best);

  std::ostringstream steps;
  steps << "step,loss\n";
  for (size_t i = 0; i < result.step_losses.size(); ++i)
    steps << i << ',' << fmt(result.step_losses[i]) << '\n';
  write_text((fs::path(out_dir) / "steps.csv").string(), steps.str());

  std::ostringstream epochs;
  epochs << "epoch,mean_loss,val_f1\n";
  for (size_t i = 0; i < result.epoch_mean_loss.size(); ++i)
    epochs << i << ',' << fmt(result.epoch_mean_loss[i]) << ',' << fmt(result.epoch_val_f1[i])
           << '\n';
  write_text((fs::path(out_dir) / "epochs.csv").string(), epochs.str());

  json summary;
  summary["command"] = "finetune";
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_f1"] = result.best_val_f1;
  summary["epochs_run"] = result.epochs_run;
  summary["init"] = init_ckpt;
  summary["model"] = model_path;
  return summary;
}

json detect(cfg::Config c, const std::string& ckpt_path, const std::string& manifest_path,
            const std::string& out_path) {
  c.finalize();
  boundary::BoundaryModel model =
      boundary::BoundaryModel::from_checkpoint(ckpt::load_checkpoint(ckpt_path));
  std::vector<CorpusVideo> corpus = load_corpus(manifest_path, c.get_string("detect.split"));
  GEBD_CHECK_CFG(!corpus.empty(), "detect: no videos in the requested split");

  const double threshold = c.get_double("detect.threshold");
  const double window_sec = c.get_double("detect.window_sec");
  const int64_t n = static_cast<int64_t>(corpus.size());
  std::vector<eval::Prediction> preds(static_cast<size_t>(n));
  parallel_for(n, static_cast<int>(c.workers()), [&](int64_t i) {
    boundary::BoundaryPrediction bp =
        boundary::detect_boundaries(model, corpus[static_cast<size_t>(i)].frames, threshold,
                                    window_sec);
    eval::Prediction& p = preds[static_cast<size_t>(i)];
    p.video_id = bp.video_id;
    p.fps = bp.fps;
    p.boundaries_sec = bp.boundaries_sec;
    p.probabilities.reserve(bp.candidate_frames.size());
    for (size_t j = 0; j < bp.candidate_frames.size(); ++j)
      p.probabilities.emplace_back(bp.candidate_frames[j], bp.probabilities[j]);
  });

  const std::string parent = ensure_parent(out_path);
  eval::save_predictions_json(out_path, preds);
  c.write_resolved((fs::path(parent) / "resolved_config.json").string());

  int64_t total = 0;
  for (const eval::Prediction& p : preds) total += static_cast<int64_t>(p.boundaries_sec.size());
  json summary;
  summary["command"] = "detect";
  summary["out"] = out_path;
  summary["threshold"] = threshold;
  summary["total_boundaries"] = total;
  summary["videos"] = n;
  summary["window_sec"] = window_sec;
  return summary;
}

json eval(cfg::Config c, const std::string& pred_path, const std::string& gt_path,
          const std::string& out_path) {
  c.finalize();
  std::vector<eval::Prediction> preds = eval::load_predictions_json(pred_path);
  GEBD_CHECK_IO(!preds.empty(), "no predictions in " + pred_path);
  std::vector<eval::AnnotationSet> sets = eval::load_annotations_json(gt_path);
  std::map<std::string, const eval::AnnotationSet*> by_id;
  for (const eval::AnnotationSet& s : sets) by_id[s.video_id] = &s;

  // Scored over the predicted videos; ground-truth entries without a
  // prediction are ignored so split-level prediction files evaluate cleanly.
  std::vector<std::vector<double>> detections;
  std::vector<eval::AnnotationSet> matched;
  for (const eval::Prediction& p : preds) {
    auto it = by_id.find(p.video_id);
    GEBD_CHECK_IO(it != by_id.end(), "no ground truth for video " + p.video_id);
    detections.push_back(p.boundaries_sec);
    matched.push_back(*it->second);
  }

  std::vector<double> thresholds = eval::parse_threshold_spec(c.get_string("eval.thresholds"));
  const bool macro = c.get_string("eval.aggregate") == "macro";
  eval::EvalReport report = eval::evaluate_corpus(detections, matched, thresholds, macro);

  const std::string parent = ensure_parent(out_path);
  eval::save_report_json(out_path, report);
  const std::string csv_path = fs::path(out_path).replace_extension(".csv").string();
  eval::save_report_csv(csv_path, report);
  c.write_resolved((fs::path(parent) / "resolved_config.json").string());

  json f1s = json::array();
  for (const eval::ThresholdRow& row : report.corpus) f1s.push_back(row.f1);
  json summary;
  summary["command"] = "eval";
  summary["aggregate"] = macro ? "macro" : "micro";
  summary["avg_f1"] = report.avg_f1;
  summary["csv"] = csv_path;
  summary["f1"] = f1s;
  summary["report"] = out_path;
  summary["thresholds"] = thresholds;
  summary["videos"] = static_cast<int64_t>(preds.size());
  return summary;
}

json viz_motion(cfg::Config c, const std::string& ckpt_path, const std::string& video_dir,
                const std::string& out_dir) {
  c.finalize();
  ckpt::Checkpoint ck = ckpt::load_checkpoint(ckpt_path);
  GEBD_CHECK_IO(ck.meta.contains("config"), "checkpoint is missing the encoder config");
  enc::EncoderConfig ecfg = ckpt::encoder_config_from_json(ck.meta["config"]);
  nn::ParamStore store;
  Rng init_rng(0);
  enc::Encoder encoder(ecfg, store, init_rng);
  ckpt::read_store(ck, "query", store);

  data::VideoFrames frames = data::load_video_frames(video_dir);
  GEBD_CHECK_ARG(frames.t >= 2, "confidence maps need at least 2 frames");

  enc::EncodeOptions options;
  options.temporal_enabled = true;
  options.ms_enabled = true;
  options.want_confidence = true;

  pretext::AugmentConfig resize;
  resize.out_side = static_cast<int>(ecfg.input_side);
  resize.p_scale = 0.0;
  resize.p_jitter = 0.0;
  resize.p_gray = 0.0;
  resize.p_blur = 0.0;
  resize.p_flip = 0.0;

  // Encode in overlapping chunks so every adjacent pair is produced exactly
  // once: a chunk starting at pair p covers pairs p .. p+chunk-2.
  const int64_t side = ecfg.input_side;
  const int64_t per = 3 * side * side;
  const int64_t chunk = std::min<int64_t>(8, frames.t);
  std::vector<Tensor> maps(static_cast<size_t>(frames.t - 1));
  int64_t next = 0;
  while (next < frames.t - 1) {
    const int64_t s = next;
    const int64_t e = std::min<int64_t>(s + chunk, frames.t);
    Tensor input({e - s, 3, side, side});
    for (int64_t i = s; i < e; ++i) {
      Tensor frame = data::to_model_input(frames, i);
      if (frames.h != side || frames.w != side) frame = pretext::augment(frame, resize, 0);
      std::memcpy(input.data() + (i - s) * per, frame.data(),
                  static_cast<size_t>(per) * sizeof(double));
    }
    enc::EncodeResult res = encoder.encode(ag::Var::constant(std::move(input)), options);
    GEBD_CHECK(static_cast<int64_t>(res.confidence.size()) == e - s - 1,
               "encoder returned an unexpected confidence count");
    for (int64_t j = 0; j < e - s - 1; ++j) maps[static_cast<size_t>(s + j)] = res.confidence[static_cast<size_t>(j)];
    next = e - 1;
  }

  double lo = maps[0].data()[0], hi = maps[0].data()[0];
  for (const Tensor& m : maps)
    for (int64_t i = 0; i < m.numel(); ++i) {
      lo = std::min(lo, m.data()[i]);
      hi = std::max(hi, m.data()[i]);
    }

  fs::create_directories(out_dir);
  c.write_resolved((fs::path(out_dir) / "resolved_config.json").string());
  const int64_t gh = maps[0].shape()[0], gw = maps[0].shape()[1];
  json files = json::array();
  for (size_t p = 0; p < maps.size(); ++p) {
    cv::Mat img(static_cast<int>(gh), static_cast<int>(gw), CV_8UC1);
    for (int64_t y = 0; y < gh; ++y)
      for (int64_t x = 0; x < gw; ++x) {
        double v = maps[p].data()[y * gw + x];
        double norm = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        img.at<uint8_t>(static_cast<int>(y), static_cast<int>(x)) =
            static_cast<uint8_t>(std::lround(255.0 * norm));
      }
    const std::string name = "conf_" + pad4(static_cast<int64_t>(p)) + ".png";
    GEBD_CHECK_IO(cv::imwrite((fs::path(out_dir) / name).string(), img),
                  "cannot write " + name);
    files.push_back(name);
  }

  json sidecar;
  sidecar["video_id"] = frames.video_id;
  sidecar["fps"] = frames.fps;
  sidecar["grid_height"] = gh;
  sidecar["grid_width"] = gw;
  sidecar["num_maps"] = static_cast<int64_t>(maps.size());
  sidecar["normalization"] = "global-min-max";
  sidecar["raw_min"] = lo;
  sidecar["raw_max"] = hi;
  sidecar["files"] = files;
  write_json_file((fs::path(out_dir) / "motion.json").string(), sidecar);

  json summary = sidecar;
  summary["command"] = "viz-motion";
  summary["out"] = out_dir;
  return summary;
}

json smoke(cfg::Config c, const std::string& out_dir) {
  c.finalize();
  fs::create_directories(out_dir);
  c.write_resolved((fs::path(out_dir) / "resolved_config.json").string());

  auto run_stage = [](const std::string& name, const std::function<json()>& fn) {
    auto t0 = std::chrono::steady_clock::now();
    json r;
    try {
      r = fn();
    } catch (const Error& e) {
      throw Error(e.code(), "stage " + name + ": " + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "[smoke] " << name << " finished in " << fmt(secs) << "s\n";
    return r;
  };

  const std::string corpus_dir = (fs::path(out_dir) / "corpus").string();
  run_stage("gen-synth", [&] { return gen_synth(c, corpus_dir); });

  cfg::Config cc = c;
  cc.set("corpus.manifest", (fs::path(corpus_dir) / "manifest.json").string());
  cc.set("detect.split", "val");

  const std::string pretrain_dir = (fs::path(out_dir) / "pretrain").string();
  json pre = run_stage("pretrain", [&] { return pretrain(cc, pretrain_dir); });
  const std::string encoder_path = (fs::path(pretrain_dir) / "encoder.gebd").string();

  cfg::Config coff = cc;
  coff.set("finetune.ms_enabled", false);

  struct Variant {
    std::string name;
    cfg::Config config;
    std::string init;
  };
  std::vector<Variant> variants = {{"ms_on", cc, encoder_path},
                                   {"ms_off", coff, encoder_path},
                                   {"baseline", cc, ""}};

  json fts, f1s;
  for (const Variant& v : variants) {
    const std::string ft_dir = (fs::path(out_dir) / ("finetune_" + v.name)).string();
    json ft = run_stage("finetune-" + v.name,
                        [&] { return finetune(v.config, v.init, ft_dir); });
    const std::string pred_path =
        (fs::path(out_dir) / ("detect_" + v.name) / "pred.json").string();
    run_stage("detect-" + v.name, [&] {
      return detect(v.config, (fs::path(ft_dir) / "model.gebd").string(),
                    cc.get_string("corpus.manifest"), pred_path);
    });
    json ev = run_stage("eval-" + v.name, [&] {
      return eval(v.config, pred_path, (fs::path(corpus_dir) / "annotations.json").string(),
                  (fs::path(out_dir) / ("eval_" + v.name) / "report.json").string());
    });

    double f1_05 = -1.0;
    const auto& ths = ev["thresholds"];
    for (size_t i = 0; i < ths.size(); ++i)
      if (std::fabs(ths[i].get<double>() - 0.05) < 1e-12) {
        f1_05 = ev["f1"][i].get<double>();
        break;
      }
    GEBD_CHECK_CFG(f1_05 >= 0.0, "smoke needs 0.05 in eval.thresholds");
    fts[v.name] = {{"best_epoch", ft["best_epoch"]},
                   {"best_val_f1", ft["best_val_f1"]},
                   {"epochs_run", ft["epochs_run"]}};
    f1s[v.name] = f1_05;
  }

  json summary;
  summary["command"] = "smoke";
  summary["seed"] = c.get_int("seed");
  summary["f1"] = f1s["ms_on"];
  summary["f1_ms_off"] = f1s["ms_off"];
  summary["f1_baseline"] = f1s["baseline"];
  summary["ms_delta"] = f1s["ms_on"].get<double>() - f1s["ms_off"].get<double>();
  summary["baseline_delta"] = f1s["ms_on"].get<double>() - f1s["baseline"].get<double>();
  summary["pretrain"] = {{"steps", pre["steps"]}, {"final", pre["final"]}};
  summary["finetune"] = fts;
  write_json_file((fs::path(out_dir) / "summary.json").string(), summary);
  return summary;
}

}  // namespace gebd::run
