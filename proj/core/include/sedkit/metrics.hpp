// Copyright 2026 The sedkit Authors.
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

// Segment-based detection metrics with one segment per frame.
//
// Counts are pooled before any ratio is taken, so corpus-level micro scores
// weight every segment equally regardless of clip boundaries.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sedkit/matrix.hpp"

namespace sedkit {

struct SegmentCounts {
  // Per class, summed over segments.
  std::vector<std::int64_t> tp, fp, fn;
  // Summed per-segment tallies.
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t n_ref = 0;
  std::int64_t segments = 0;

  explicit SegmentCounts(std::size_t n_classes = 0)
      : tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0) {}

  std::size_t n_classes() const noexcept { return tp.size(); }
  /// Associative, commutative accumulation.
  void merge(const SegmentCounts& other);

  friend bool operator==(const SegmentCounts&, const SegmentCounts&) = default;
};

/// ref and sys are [classes x segments] 0/1 matrices of identical shape.
SegmentCounts segment_counts(const BinaryMatrix& ref, const BinaryMatrix& sys);

struct FScores {
  double micro = 0.0;
  double macro = 0.0;
  std::vector<double> per_class;
};

/// F = 2TP / (2TP + FP + FN), 0 when the denominator is 0. Macro averages
/// over classes present in the reference (all classes if none is).
FScores f_scores(const SegmentCounts& counts);

struct ErrorRates {
  double micro = 0.0;
  double macro = 0.0;
  /// (FN + FP) / N_ref per class; empty for classes absent from the reference.
  std::vector<std::optional<double>> per_class;
};

/// Throws DataError when the reference has no active segment at all.
ErrorRates error_rates(const SegmentCounts& counts);

struct ClassMetrics {
  std::string label;
  double f = 0.0;
  std::optional<double> er;
  std::int64_t tp = 0, fp = 0, fn = 0, n_ref = 0;

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
  double micro_f = 0.0;
  double macro_f = 0.0;
  double micro_er = 0.0;
  double macro_er = 0.0;
  std::vector<ClassMetrics> per_class;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport make_report(const SegmentCounts& counts,
                          const std::vector<std::string>& labels);

/// Pools counts over every clip id in `references`. Throws DataError listing
/// the ids that lack a prediction (or a reference).
MetricsReport evaluate_corpus(const std::map<std::string, BinaryMatrix>& references,
                              const std::map<std::string, BinaryMatrix>& predictions,
                              const std::vector<std::string>& labels);

/// JSON with fields micro_f, macro_f, micro_er, macro_er and a per-class table.
std::string report_to_json(const MetricsReport& report);
/// One row per class: label,f,er,tp,fp,fn,n_ref.
std::string report_to_csv(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

}  // namespace sedkit
