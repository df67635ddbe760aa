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

#include "gebd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gebd/jsonio.hpp"

namespace gebd::eval {

using nlohmann::json;

void validate(const AnnotationSet& set) {
  GEBD_CHECK_ARG(set.duration_sec > 0.0, "annotation set: duration must be positive");
  GEBD_CHECK_ARG(!set.annotators.empty(), "annotation set: needs at least one annotator");
  for (const auto& ann : set.annotators) {
    for (size_t i = 0; i < ann.size(); ++i) {
      GEBD_CHECK_ARG(ann[i] >= 0.0 && ann[i] <= set.duration_sec,
                     "annotation set: timestamp outside [0, duration]");
      if (i > 0)
        GEBD_CHECK_ARG(ann[i] > ann[i - 1], "annotation set: timestamps must strictly ascend");
    }
  }
}

double rel_dis(double detected, double truth, double duration) {
  GEBD_CHECK_ARG(duration > 0.0, "rel_dis: duration must be positive");
  return std::fabs(detected - truth) / duration;
}

namespace {

// Kuhn's augmenting-path search over the feasibility graph.
bool try_augment(int u, const std::vector<std::vector<int>>& adj, std::vector<char>& used,
                 std::vector<int>& match_of_truth) {
  for (int v : adj[static_cast<size_t>(u)]) {
    if (used[static_cast<size_t>(v)]) continue;
    used[static_cast<size_t>(v)] = 1;
    if (match_of_truth[static_cast<size_t>(v)] < 0 ||
        try_augment(match_of_truth[static_cast<size_t>(v)], adj, used, match_of_truth)) {
      match_of_truth[static_cast<size_t>(v)] = u;
      return true;
    }
  }
  return false;
}

}  // namespace

int64_t match_boundaries(const std::vector<double>& detections,
                         const std::vector<double>& truths, double duration, double threshold) {
  GEBD_CHECK_ARG(duration > 0.0, "match_boundaries: duration must be positive");
  if (detections.empty() || truths.empty()) return 0;
  const int n = static_cast<int>(detections.size());
  const int m = static_cast<int>(truths.size());
  std::vector<std::vector<int>> adj(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (rel_dis(detections[static_cast<size_t>(i)], truths[static_cast<size_t>(j)], duration) <=
          threshold)
        adj[static_cast<size_t>(i)].push_back(j);
  std::vector<int> match_of_truth(static_cast<size_t>(m), -1);
  int64_t matched = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<char> used(static_cast<size_t>(m), 0);
    if (try_augment(i, adj, used, match_of_truth)) ++matched;
  }
  return matched;
}

int64_t match_boundaries_greedy(const std::vector<double>& detections,
                                const std::vector<double>& truths, double duration,
                                double threshold) {
  GEBD_CHECK_ARG(duration > 0.0, "match_boundaries_greedy: duration must be positive");
  std::vector<char> taken(truths.size(), 0);
  int64_t matched = 0;
  for (double det : detections) {
    int best = -1;
    double best_d = 0.0;
    for (size_t j = 0; j < truths.size(); ++j) {
      if (taken[j]) continue;
      double d = rel_dis(det, truths[j], duration);
      if (d > threshold) continue;
      if (best < 0 || d < best_d) {
        best = static_cast<int>(j);
        best_d = d;
      }
    }
    if (best >= 0) {
      taken[static_cast<size_t>(best)] = 1;
      ++matched;
    }
  }
  return matched;
}

MatchCounts match_counts(const std::vector<double>& detections,
                         const std::vector<double>& truths, double duration, double threshold) {
  MatchCounts c;
  c.detected = static_cast<int64_t>(detections.size());
  c.truth = static_cast<int64_t>(truths.size());
  c.matched = match_boundaries(detections, truths, duration, threshold);
  return c;
}

Prf prf_from_counts(const MatchCounts& c) {
  Prf out;
  out.precision = c.detected > 0 ? static_cast<double>(c.matched) / static_cast<double>(c.detected)
                                 : 0.0;
  out.recall = c.truth > 0 ? static_cast<double>(c.matched) / static_cast<double>(c.truth) : 0.0;
  double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

Prf f1_at(const std::vector<double>& detections, const std::vector<double>& truths,
          double duration, double threshold) {
  return prf_from_counts(match_counts(detections, truths, duration, threshold));
}

VideoEval evaluate_multi_annotator(const std::vector<double>& detections,
                                   const AnnotationSet& set,
                                   const std::vector<double>& thresholds) {
  validate(set);
  VideoEval ve;
  ve.video_id = set.video_id;
  ve.per_threshold.reserve(thresholds.size());
  for (double thr : thresholds) {
    VideoThresholdEval best;
    best.threshold = thr;
    bool have = false;
    for (size_t a = 0; a < set.annotators.size(); ++a) {
      MatchCounts c = match_counts(detections, set.annotators[a], set.duration_sec, thr);
      Prf prf = prf_from_counts(c);
      if (!have || prf.f1 > best.prf.f1) {
        have = true;
        best.annotator = static_cast<int>(a);
        best.counts = c;
        best.prf = prf;
      }
    }
    ve.per_threshold.push_back(best);
  }
  return ve;
}

int select_consistent_annotation(const AnnotationSet& set) {
  validate(set);
  const size_t n = set.annotators.size();
  if (n == 1) return 0;
  int best = 0;
  double best_score = -1.0;
  for (size_t a = 0; a < n; ++a) {
    double acc = 0.0;
    for (size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      acc += f1_at(set.annotators[a], set.annotators[b], set.duration_sec, 0.05).f1;
    }
    double score = acc / static_cast<double>(n - 1);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(a);
    }
  }
  return best;
}

EvalReport evaluate_corpus(const std::vector<std::vector<double>>& detections_per_video,
                           const std::vector<AnnotationSet>& sets,
                           const std::vector<double>& thresholds, bool macro) {
  GEBD_CHECK_ARG(detections_per_video.size() == sets.size(),
                 "evaluate_corpus: detections/annotations count mismatch");
  GEBD_CHECK_ARG(!thresholds.empty(), "evaluate_corpus: empty threshold list");
  EvalReport report;
  report.thresholds = thresholds;
  report.macro = macro;
  for (size_t v = 0; v < sets.size(); ++v)
    report.videos.push_back(evaluate_multi_annotator(detections_per_video[v], sets[v], thresholds));

  for (size_t t = 0; t < thresholds.size(); ++t) {
    ThresholdRow row;
    row.threshold = thresholds[t];
    if (macro) {
      double p = 0.0, r = 0.0, f = 0.0;
      for (const auto& ve : report.videos) {
        p += ve.per_threshold[t].prf.precision;
        r += ve.per_threshold[t].prf.recall;
        f += ve.per_threshold[t].prf.f1;
      }
      double n = report.videos.empty() ? 1.0 : static_cast<double>(report.videos.size());
      row.precision = p / n;
      row.recall = r / n;
      row.f1 = f / n;
    } else {
      MatchCounts pooled;
      for (const auto& ve : report.videos) {
        pooled.matched += ve.per_threshold[t].counts.matched;
        pooled.detected += ve.per_threshold[t].counts.detected;
        pooled.truth += ve.per_threshold[t].counts.truth;
      }
      Prf prf = prf_from_counts(pooled);
      row.precision = prf.precision;
      row.recall = prf.recall;
      row.f1 = prf.f1;
    }
    report.corpus.push_back(row);
  }
  double acc = 0.0;
  for (const auto& row : report.corpus) acc += row.f1;
  report.avg_f1 = acc / static_cast<double>(report.corpus.size());
  return report;
}

std::vector<double> parse_threshold_spec(const std::string& spec) {
  double lo = 0.0, hi = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream is(spec);
  is >> lo >> c1 >> hi >> c2 >> step;
  GEBD_CHECK_ARG(!is.fail() && c1 == ':' && c2 == ':', "threshold spec must be lo:hi:step");
  GEBD_CHECK_ARG(step > 0.0 && hi >= lo, "threshold spec: need step > 0 and hi >= lo");
  std::vector<double> out;
  for (double v = lo; v <= hi + step * 0.5; v += step) out.push_back(v);
  GEBD_CHECK_ARG(!out.empty(), "threshold spec produced no thresholds");
  return out;
}

// ---------------- file formats ----------------

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

}  // namespace

std::vector<AnnotationSet> load_annotations_json(const std::string& path) {
  json j = read_json_file(path);
  GEBD_CHECK_IO(j.contains("videos") && j["videos"].is_array(),
                path + ": expected top-level \"videos\" array");
  std::vector<AnnotationSet> out;
  for (const auto& v : j["videos"]) {
    AnnotationSet set;
    set.video_id = v.at("video_id").get<std::string>();
    set.duration_sec = v.at("duration_sec").get<double>();
    set.fps = v.at("fps").get<double>();
    for (const auto& ann : v.at("annotators"))
      set.annotators.push_back(ann.get<std::vector<double>>());
    validate(set);
    out.push_back(std::move(set));
  }
  return out;
}

void save_annotations_json(const std::string& path, const std::vector<AnnotationSet>& sets) {
  json videos = json::array();
  for (const auto& set : sets) {
    json v;
    v["video_id"] = set.video_id;
    v["duration_sec"] = set.duration_sec;
    v["fps"] = set.fps;
    v["annotators"] = set.annotators;
    videos.push_back(std::move(v));
  }
  write_json_file(path, json{{"videos", videos}});
}

std::vector<Prediction> load_predictions_json(const std::string& path) {
  json j = read_json_file(path);
  GEBD_CHECK_IO(j.contains("videos") && j["videos"].is_array(),
                path + ": expected top-level \"videos\" array");
  std::vector<Prediction> out;
  for (const auto& v : j["videos"]) {
    Prediction p;
    p.video_id = v.at("video_id").get<std::string>();
    p.fps = v.at("fps").get<double>();
    p.boundaries_sec = v.at("boundaries_sec").get<std::vector<double>>();
    if (v.contains("probabilities"))
      for (const auto& pair : v["probabilities"])
        p.probabilities.emplace_back(pair.at(0).get<int64_t>(), pair.at(1).get<double>());
    out.push_back(std::move(p));
  }
  return out;
}

void save_predictions_json(const std::string& path, const std::vector<Prediction>& preds) {
  json videos = json::array();
  for (const auto& p : preds) {
    json v;
    v["video_id"] = p.video_id;
    v["fps"] = p.fps;
    v["boundaries_sec"] = p.boundaries_sec;
    json probs = json::array();
    for (const auto& [frame, prob] : p.probabilities) probs.push_back(json::array({frame, prob}));
    v["probabilities"] = std::move(probs);
    videos.push_back(std::move(v));
  }
  write_json_file(path, json{{"videos", videos}});
}

void save_report_json(const std::string& path, const EvalReport& report) {
  json j;
  j["thresholds"] = report.thresholds;
  j["aggregation"] = report.macro ? "macro" : "micro";
  json rows = json::array();
  for (const auto& row : report.corpus)
    rows.push_back({{"threshold", row.threshold},
                    {"precision", row.precision},
                    {"recall", row.recall},
                    {"f1", row.f1}});
  j["corpus"] = std::move(rows);
  j["avg_f1"] = report.avg_f1;
  json videos = json::array();
  for (const auto& ve : report.videos) {
    json v;
    v["video_id"] = ve.video_id;
    json per = json::array();
    for (const auto& te : ve.per_threshold)
      per.push_back({{"threshold", te.threshold},
                     {"annotator", te.annotator},
                     {"matched", te.counts.matched},
                     {"detected", te.counts.detected},
                     {"truth", te.counts.truth},
                     {"precision", te.prf.precision},
                     {"recall", te.prf.recall},
                     {"f1", te.prf.f1}});
    v["per_threshold"] = std::move(per);
    videos.push_back(std::move(v));
  }
  j["videos"] = std::move(videos);
  write_json_file(path, j);
}

void save_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  GEBD_CHECK_IO(out.good(), "cannot write " + path);
  out << "metric";
  char buf[32];
  for (double t : report.thresholds) {
    std::snprintf(buf, sizeof(buf), "%.2f", t);
    out << "," << buf;
  }
  out << ",avg\n";
  auto emit = [&](const char* name, auto getter, double avg) {
    out << name;
    for (const auto& row : report.corpus) {
      std::snprintf(buf, sizeof(buf), "%.4f", getter(row));
      out << "," << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.4f", avg);
    out << "," << buf << "\n";
  };
  double avg_p = 0.0, avg_r = 0.0;
  for (const auto& row : report.corpus) {
    avg_p += row.precision;
    avg_r += row.recall;
  }
  double n = static_cast<double>(report.corpus.size());
  emit("precision", [](const ThresholdRow& r) { return r.precision; }, avg_p / n);
  emit("recall", [](const ThresholdRow& r) { return r.recall; }, avg_r / n);
  emit("f1", [](const ThresholdRow& r) { return r.f1; }, report.avg_f1);
  GEBD_CHECK_IO(out.good(), "failed while writing " + path);
}

}  // namespace gebd::eval
