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

// Command-line front end. Talks to the library exclusively through the C
// API: flags become config overrides, commands map one-to-one onto the
// gebd_* calls, summaries print to stdout as single-line JSON. Usage errors
// exit 2; command failures print the library's one-line error JSON to
// stderr and exit 1.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <gebd_c.h>

namespace {

struct SessionDeleter {
  void operator()(gebd_session* s) const { gebd_session_free(s); }
};
using SessionPtr = std::unique_ptr<gebd_session, SessionDeleter>;

// Flags shared by every command. Dedicated flags are sugar for config keys;
// --set is applied last so it can override any of them.
struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::int64_t seed = 0;
  std::int64_t workers = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file,
                  "Config file, flat JSON object or key=value lines");
  cmd->add_option("--set", f.sets, "KEY=VALUE override, repeatable, applied last")
      ->type_name("KEY=VALUE");
  f.seed_opt = cmd->add_option("--seed", f.seed, "Root RNG seed");
  f.workers_opt = cmd->add_option("--workers", f.workers, "Threads for per-video work");
}

int fail(gebd_session* s) {
  std::fprintf(stderr, "%s\n", gebd_last_error(s));
  return 1;
}

// Applies config file, dedicated-flag overrides, then --set overrides.
// Returns 0 or the process exit code.
int configure(gebd_session* s, const CommonFlags& f, const std::vector<std::string>& sugar) {
  if (!f.config_file.empty() && gebd_config_file(s, f.config_file.c_str()) != GEBD_OK)
    return fail(s);
  std::vector<std::string> overrides = sugar;
  if (f.seed_opt && f.seed_opt->count() > 0)
    overrides.push_back("seed=" + std::to_string(f.seed));
  if (f.workers_opt && f.workers_opt->count() > 0)
    overrides.push_back("workers=" + std::to_string(f.workers));
  overrides.insert(overrides.end(), f.sets.begin(), f.sets.end());
  for (const std::string& o : overrides)
    if (gebd_config_set(s, o.c_str()) != GEBD_OK) return fail(s);
  return 0;
}

int finish(gebd_session* s, gebd_status status, char* summary) {
  if (status != GEBD_OK) return fail(s);
  std::printf("%s\n", summary ? summary : "{}");
  gebd_string_free(summary);
  return 0;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gebdkit: motion-aware self-supervised generic event boundary detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gebd_version()));

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic labeled video corpus");
  CommonFlags gen_common;
  std::int64_t gen_count = 0;
  std::string gen_out, gen_profile = "desk";
  auto* gen_count_opt = gen->add_option("--count", gen_count, "Number of videos");
  gen->add_option("--out", gen_out, "Corpus output directory")->required();
  gen->add_option("--profile", gen_profile, "Scene profile")
      ->check(CLI::IsMember({"desk"}));
  add_common(gen, gen_common);

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Self-supervised encoder pretraining");
  CommonFlags pre_common;
  std::string pre_out;
  pre->add_option("--out", pre_out, "Run output directory")->required();
  add_common(pre, pre_common);

  // finetune
  auto* fin = app.add_subcommand("finetune", "Supervised boundary fine-tuning");
  CommonFlags fin_common;
  std::string fin_out, fin_ckpt, fin_labels;
  double fin_sigma = 0.0;
  fin->add_option("--out", fin_out, "Run output directory")->required();
  fin->add_option("--ckpt", fin_ckpt, "Pretrained encoder checkpoint (omit to train fresh)");
  auto* fin_labels_opt =
      fin->add_option("--labels", fin_labels, "Label scheme")->check(CLI::IsMember({"soft", "hard"}));
  auto* fin_sigma_opt = fin->add_option("--sigma", fin_sigma, "Soft label Gaussian sigma, frames");
  add_common(fin, fin_common);

  // detect
  auto* det = app.add_subcommand("detect", "Run boundary detection over a video manifest");
  CommonFlags det_common;
  std::string det_ckpt, det_manifest, det_out, det_split;
  double det_threshold = 0.0, det_window = 0.0;
  det->add_option("--ckpt", det_ckpt, "Fine-tuned model checkpoint")->required();
  det->add_option("--video-manifest", det_manifest, "Corpus manifest of videos to score")
      ->required();
  det->add_option("--out", det_out, "Prediction JSON path")->required();
  auto* det_thr_opt = det->add_option("--threshold", det_threshold, "Probability threshold");
  auto* det_win_opt =
      det->add_option("--agg-window", det_window, "Aggregation window, seconds");
  auto* det_split_opt = det->add_option("--split", det_split, "Manifest split to score")
                            ->check(CLI::IsMember({"all", "train", "val"}));
  add_common(det, det_common);

  // eval
  auto* ev = app.add_subcommand("eval", "Score predictions against ground truth");
  CommonFlags ev_common;
  std::string ev_pred, ev_gt, ev_out, ev_thresholds;
  ev->add_option("--pred", ev_pred, "Prediction JSON")->required();
  ev->add_option("--gt", ev_gt, "Ground-truth annotations JSON")->required();
  ev->add_option("--out", ev_out, "Report JSON path (CSV lands beside it)")->required();
  auto* ev_thr_opt =
      ev->add_option("--thresholds", ev_thresholds, "Threshold sweep, lo:hi:step");
  add_common(ev, ev_common);

  // viz-motion
  auto* viz = app.add_subcommand("viz-motion", "Render per-frame-pair motion confidence maps");
  CommonFlags viz_common;
  std::string viz_ckpt, viz_video, viz_out;
  viz->add_option("--ckpt", viz_ckpt, "Checkpoint with encoder weights")->required();
  viz->add_option("--video", viz_video, "Video frame directory")->required();
  viz->add_option("--out-dir", viz_out, "Output directory for PNGs and sidecar")->required();
  add_common(viz, viz_common);

  // smoke
  auto* smk = app.add_subcommand("smoke", "End-to-end pipeline smoke run");
  CommonFlags smk_common;
  std::string smk_out;
  smk->add_option("--out", smk_out, "Run output directory")->required();
  add_common(smk, smk_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the error plus the --help pointer
    return 2;
  }

  SessionPtr session(gebd_session_new());
  if (!session) {
    std::fprintf(stderr, "{\"code\":\"runtime_error\",\"error\":\"out of memory\"}\n");
    return 1;
  }
  gebd_session* s = session.get();
  char* summary = nullptr;

  if (gen->parsed()) {
    std::vector<std::string> sugar;
    if (gen_count_opt->count() > 0) sugar.push_back("gen.count=" + std::to_string(gen_count));
    if (int rc = configure(s, gen_common, sugar)) return rc;
    gebd_status st = gebd_gen_synth(s, gen_out.c_str(), &summary);
    return finish(s, st, summary);
  }
  if (pre->parsed()) {
    if (int rc = configure(s, pre_common, {})) return rc;
    gebd_status st = gebd_pretrain(s, pre_out.c_str(), &summary);
    return finish(s, st, summary);
  }
  if (fin->parsed()) {
    std::vector<std::string> sugar;
    if (fin_labels_opt->count() > 0) sugar.push_back("finetune.labels=" + fin_labels);
    if (fin_sigma_opt->count() > 0) sugar.push_back("finetune.sigma=" + fmt_double(fin_sigma));
    if (int rc = configure(s, fin_common, sugar)) return rc;
    gebd_status st = gebd_finetune(s, fin_ckpt.empty() ? nullptr : fin_ckpt.c_str(),
                                   fin_out.c_str(), &summary);
    return finish(s, st, summary);
  }
  if (det->parsed()) {
    std::vector<std::string> sugar;
    if (det_thr_opt->count() > 0)
      sugar.push_back("detect.threshold=" + fmt_double(det_threshold));
    if (det_win_opt->count() > 0)
      sugar.push_back("detect.window_sec=" + fmt_double(det_window));
    if (det_split_opt->count() > 0) sugar.push_back("detect.split=" + det_split);
    if (int rc = configure(s, det_common, sugar)) return rc;
    gebd_status st = gebd_detect(s, det_ckpt.c_str(), det_manifest.c_str(), det_out.c_str(),
                                 &summary);
    return finish(s, st, summary);
  }
  if (ev->parsed()) {
    std::vector<std::string> sugar;
    if (ev_thr_opt->count() > 0) sugar.push_back("eval.thresholds=" + ev_thresholds);
    if (int rc = configure(s, ev_common, sugar)) return rc;
    gebd_status st = gebd_eval(s, ev_pred.c_str(), ev_gt.c_str(), ev_out.c_str(), &summary);
    return finish(s, st, summary);
  }
  if (viz->parsed()) {
    if (int rc = configure(s, viz_common, {})) return rc;
    gebd_status st = gebd_viz_motion(s, viz_ckpt.c_str(), viz_video.c_str(), viz_out.c_str(),
                                     &summary);
    return finish(s, st, summary);
  }
  if (smk->parsed()) {
    if (int rc = configure(s, smk_common, {})) return rc;
    gebd_status st = gebd_smoke(s, smk_out.c_str(), &summary);
    return finish(s, st, summary);
  }
  std::fprintf(stderr, "no command selected\n");
  return 2;
}
