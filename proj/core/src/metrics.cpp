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
#include "sedkit/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "json.hpp"
#include "sedkit/errors.hpp"

namespace sedkit {

void SegmentCounts::merge(const SegmentCounts& other) {
  if (other.n_classes() != n_classes()) {
    throw DataError("cannot merge segment counts with " +
                    std::to_string(other.n_classes()) + " vs " +
                    std::to_string(n_classes()) + " classes");
  }
  for (std::size_t n = 0; n < tp.size(); ++n) {
    tp[n] += other.tp[n];
    fp[n] += other.fp[n];
    fn[n] += other.fn[n];
  }
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  n_ref += other.n_ref;
  segments += other.segments;
}

SegmentCounts segment_counts(const BinaryMatrix& ref, const BinaryMatrix& sys) {
  if (ref.rows() != sys.rows() || ref.cols() != sys.cols()) {
    throw DataError("segment_counts: reference [" + std::to_string(ref.rows()) +
                    "x" + std::to_string(ref.cols()) + "] vs system [" +
                    std::to_string(sys.rows()) + "x" +
                    std::to_string(sys.cols()) + "]");
  }
  const std::size_t classes = ref.rows(), segs = ref.cols();
  SegmentCounts c(classes);
  c.segments = static_cast<std::int64_t>(segs);
  for (std::size_t t = 0; t < segs; ++t) {
    std::int64_t fn_t = 0, fp_t = 0, ref_t = 0;
    for (std::size_t n = 0; n < classes; ++n) {
      const bool r = ref(n, t) != 0, s = sys(n, t) != 0;
      ref_t += r;
      if (r && s) ++c.tp[n];
      if (!r && s) {
        ++c.fp[n];
        ++fp_t;
      }
      if (r && !s) {
        ++c.fn[n];
        ++fn_t;
      }
    }
    c.substitutions += std::min(fn_t, fp_t);
    c.deletions += std::max<std::int64_t>(0, fn_t - fp_t);
    c.insertions += std::max<std::int64_t>(0, fp_t - fn_t);
    c.n_ref += ref_t;
  }
  return c;
}

namespace {

double f_measure(std::int64_t tp, std::int64_t fp, std::int64_t fn) {
  const std::int64_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

FScores f_scores(const SegmentCounts& counts) {
  FScores out;
  std::int64_t tp = 0, fp = 0, fn = 0;
  double present_sum = 0.0, all_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t n = 0; n < counts.n_classes(); ++n) {
    const double f = f_measure(counts.tp[n], counts.fp[n], counts.fn[n]);
    out.per_class.push_back(f);
    all_sum += f;
    if (counts.tp[n] + counts.fn[n] > 0) {
      present_sum += f;
      ++present;
    }
    tp += counts.tp[n];
    fp += counts.fp[n];
    fn += counts.fn[n];
  }
  out.micro = f_measure(tp, fp, fn);
  if (present > 0) {
    out.macro = present_sum / static_cast<double>(present);
  } else if (counts.n_classes() > 0) {
    out.macro = all_sum / static_cast<double>(counts.n_classes());
  }
  return out;
}

ErrorRates error_rates(const SegmentCounts& counts) {
  if (counts.n_ref == 0) {
    throw DataError("error rate undefined: reference has no active segments");
  }
  ErrorRates out;
  out.micro = static_cast<double>(counts.substitutions + counts.deletions +
                                  counts.insertions) /
              static_cast<double>(counts.n_ref);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t n = 0; n < counts.n_classes(); ++n) {
    const std::int64_t n_ref = counts.tp[n] + counts.fn[n];
    if (n_ref == 0) {
      out.per_class.emplace_back(std::nullopt);
      continue;
    }
    const double er = static_cast<double>(counts.fn[n] + counts.fp[n]) /
                      static_cast<double>(n_ref);
    out.per_class.emplace_back(er);
    sum += er;
    ++present;
  }
  out.macro = sum / static_cast<double>(present);
  return out;
}

MetricsReport make_report(const SegmentCounts& counts,
                          const std::vector<std::string>& labels) {
  if (labels.size() != counts.n_classes()) {
    throw DataError("make_report: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(counts.n_classes()) +
                    " classes");
  }
  const FScores f = f_scores(counts);
  const ErrorRates er = error_rates(counts);
  MetricsReport report{f.micro, f.macro, er.micro, er.macro, {}};
  for (std::size_t n = 0; n < labels.size(); ++n) {
    report.per_class.push_back({labels[n], f.per_class[n], er.per_class[n],
                                counts.tp[n], counts.fp[n], counts.fn[n],
                                counts.tp[n] + counts.fn[n]});
  }
  return report;
}

MetricsReport evaluate_corpus(const std::map<std::string, BinaryMatrix>& references,
                              const std::map<std::string, BinaryMatrix>& predictions,
                              const std::vector<std::string>& labels) {
  std::vector<std::string> missing;
  for (const auto& [id, ref] : references) {
    if (!predictions.count(id)) missing.push_back(id);
  }
  for (const auto& [id, sys] : predictions) {
    if (!references.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw DataError("evaluate_corpus: clips without both reference and "
                    "prediction: " + list);
  }
  SegmentCounts total(labels.size());
  for (const auto& [id, ref] : references) {
    total.merge(segment_counts(ref, predictions.at(id)));
  }
  return make_report(total, labels);
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["micro_f"] = report.micro_f;
  j["macro_f"] = report.macro_f;
  j["micro_er"] = report.micro_er;
  j["macro_er"] = report.macro_er;
  auto& classes = j["per_class"] = nlohmann::ordered_json::array();
  for (const auto& c : report.per_class) {
    nlohmann::ordered_json row;
    row["label"] = c.label;
    row["f"] = c.f;
    row["er"] = c.er ? nlohmann::ordered_json(*c.er) : nlohmann::ordered_json();
    row["tp"] = c.tp;
    row["fp"] = c.fp;
    row["fn"] = c.fn;
    row["n_ref"] = c.n_ref;
    classes.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

std::string report_to_csv(const MetricsReport& report) {
  std::string out = "label,f,er,tp,fp,fn,n_ref\n";
  char buf[160];
  for (const auto& c : report.per_class) {
    std::string er = "";
    if (c.er) {
      std::snprintf(buf, sizeof(buf), "%.17g", *c.er);
      er = buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", c.f);
    out += c.label + "," + buf + "," + er + "," + std::to_string(c.tp) + "," +
           std::to_string(c.fp) + "," + std::to_string(c.fn) + "," +
           std::to_string(c.n_ref) + "\n";
  }
  return out;
}

MetricsReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics json: ") + e.what());
  }
  MetricsReport r;
  try {
    r.micro_f = j.at("micro_f").get<double>();
    r.macro_f = j.at("macro_f").get<double>();
    r.micro_er = j.at("micro_er").get<double>();
    r.macro_er = j.at("macro_er").get<double>();
    for (const auto& row : j.at("per_class")) {
      ClassMetrics c;
      c.label = row.at("label").get<std::string>();
      c.f = row.at("f").get<double>();
      if (!row.at("er").is_null()) c.er = row.at("er").get<double>();
      c.tp = row.at("tp").get<std::int64_t>();
      c.fp = row.at("fp").get<std::int64_t>();
      c.fn = row.at("fn").get<std::int64_t>();
      c.n_ref = row.at("n_ref").get<std::int64_t>();
      r.per_class.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metrics json: ") + e.what());
  }
  return r;
}

}  // namespace sedkit
