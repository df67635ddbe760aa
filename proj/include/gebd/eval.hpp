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

#include <string>
#include <vector>

#include "gebd/common.hpp"

namespace gebd::eval {

// One video's ground truth: one or more annotators, each a strictly
// ascending list of boundary timestamps in seconds.
struct AnnotationSet {
  std::string video_id;
  double duration_sec = 0.0;
  double fps = 0.0;
  std::vector<std::vector<double>> annotators;
};

void validate(const AnnotationSet& set);

struct MatchCounts {
  int64_t matched = 0;
  int64_t detected = 0;
  int64_t truth = 0;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf prf_from_counts(const MatchCounts& c);

// |detected - truth| / duration. Throws on duration <= 0.
double rel_dis(double detected, double truth, double duration);

// Size of a maximum one-to-one matching between detections and truths where
// an edge exists iff rel_dis <= threshold. Augmenting-path matcher.
int64_t match_boundaries(const std::vector<double>& detections,
                         const std::vector<double>& truths, double duration, double threshold);

// Greedy nearest-neighbor variant kept for cross-checking against other
// implementations; not used by the reports.
int64_t match_boundaries_greedy(const std::vector<double>& detections,
                                const std::vector<double>& truths, double duration,
                                double threshold);

MatchCounts match_counts(const std::vector<double>& detections,
                         const std::vector<double>& truths, double duration, double threshold);

Prf f1_at(const std::vector<double>& detections, const std::vector<double>& truths,
          double duration, double threshold);

// Per-threshold score of one video against a multi-annotator set: the best
// annotator is selected independently at every threshold.
struct VideoThresholdEval {
  double threshold = 0.0;
  int annotator = 0;  // selected (max-F1) annotator index
  MatchCounts counts;  // counts against the selected annotator
  Prf prf;
};

struct VideoEval {
  std::string video_id;
  std::vector<VideoThresholdEval> per_threshold;
};

VideoEval evaluate_multi_annotator(const std::vector<double>& detections,
                                   const AnnotationSet& set,
                                   const std::vector<double>& thresholds);

// Argmax over annotators of the mean F1@0.05 against every other annotator
// as ground truth; ties take the lowest index. Single annotator returns 0.
int select_consistent_annotation(const AnnotationSet& set);

struct ThresholdRow {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<ThresholdRow> corpus;  // one row per threshold
  double avg_f1 = 0.0;               // mean corpus F1 over thresholds
  std::vector<VideoEval> videos;
  bool macro = false;  // aggregation mode that produced `corpus`
};

// Corpus scoring. Micro (default): per threshold, pool the matched/detected/
// truth counts of each video's selected annotator, then take P/R/F1 of the
// pooled counts. Macro: mean of the per-video max F1 (precision/recall
// averaged the same way).
EvalReport evaluate_corpus(const std::vector<std::vector<double>>& detections_per_video,
                           const std::vector<AnnotationSet>& sets,
                           const std::vector<double>& thresholds, bool macro = false);

// "lo:hi:step" inclusive of hi up to half a step of slack.
std::vector<double> parse_threshold_spec(const std::string& spec);

// ---------------- file formats ----------------

// annotations.json: {"videos":[{"video_id","duration_sec","fps","annotators":[[...]]}]}
std::vector<AnnotationSet> load_annotations_json(const std::string& path);
void save_annotations_json(const std::string& path, const std::vector<AnnotationSet>& sets);

// pred.json: {"videos":[{"video_id","fps","boundaries_sec":[...],
//                        "probabilities":[[frame, p], ...]}]}
struct Prediction {
  std::string video_id;
  double fps = 0.0;
  std::vector<double> boundaries_sec;
  std::vector<std::pair<int64_t, double>> probabilities;
};

std::vector<Prediction> load_predictions_json(const std::string& path);
void save_predictions_json(const std::string& path, const std::vector<Prediction>& preds);

void save_report_json(const std::string& path, const EvalReport& report);
// CSV with one column per threshold plus an avg column; rows for corpus
// precision, recall, and F1.
void save_report_csv(const std::string& path, const EvalReport& report);

}  // namespace gebd::eval
