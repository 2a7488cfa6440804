/**
 * Copyright 2026 The dtsnl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtsnl/checkpoint.hpp"
#include "dtsnl/datamodel.hpp"
#include "dtsnl/dta.hpp"
#include "dtsnl/error.hpp"
#include "dtsnl/gate.hpp"
#include "dtsnl/snl.hpp"

namespace dtsnl {

/// One line of a probability trace.
struct TraceRecord {
  enum class Kind { kTeacher, kUnlabeled };
  int64_t epoch = 0;
  int64_t step = 0;
  Kind kind = Kind::kUnlabeled;
  std::string sample_id;
  std::optional<ClassIndex> label;  // teacher records only
  std::vector<double> probs;

  static TraceRecord from_json(const nlohmann::json& j) {
    TraceRecord r;
    r.epoch = j.at("epoch").get<int64_t>();
    r.step = j.value("step", int64_t{0});
    const std::string kind = j.value("kind", std::string("unlabeled"));
    if (kind == "teacher") {
      r.kind = Kind::kTeacher;
      r.label = j.at("label").get<ClassIndex>();
    } else if (kind != "unlabeled") {
      throw InvalidArgument("unknown trace record kind '" + kind + "'");
    }
    r.sample_id = j.at("sample_id").get<std::string>();
    r.probs = j.at("probs").get<std::vector<double>>();
    return r;
  }
};

inline std::vector<TraceRecord> read_trace(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(TraceRecord::from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw InvalidArgument("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct AuditReport {
  std::vector<GateEpochSummary> epochs;
  io::JsonLines records;  // step and epoch records, in trace order
};

/// Replays a probability trace through the same gate the trainer uses and
/// reports per-step gate counts, per-epoch thresholds, per-class acceptance
/// rates and complementary-label library growth.
///
/// Epochs must be nondecreasing; the gate closes an epoch whenever the epoch
/// number advances and once more at the end of the trace.
inline AuditReport run_audit(const std::vector<TraceRecord>& trace, int num_classes, const DtaConfig& dta,
                             const SnlConfig& snl, io::JsonLines sink = {}) {
  AuditReport report{{}, std::move(sink)};
  ThresholdGate gate(num_classes, dta, snl);
  std::optional<int64_t> epoch, step;
  int64_t step_accepted = 0, step_rejected = 0;
  std::vector<int64_t> seen_per_class(static_cast<size_t>(num_classes), 0);

  auto close_step = [&] {
    if (!step) return;
    nlohmann::ordered_json j;
    j["type"] = "step";
    j["epoch"] = *epoch;
    j["step"] = *step;
    j["gate"] = {{"accepted", step_accepted}, {"rejected", step_rejected}};
    report.records.write(j);
    step.reset();
    step_accepted = step_rejected = 0;
  };
  auto close_epoch = [&] {
    close_step();
    GateEpochSummary s = gate.end_epoch();
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = *epoch;
    j["gate"] = s.to_json();
    std::vector<double> rate(static_cast<size_t>(num_classes), 0.0);
    for (size_t c = 0; c < rate.size(); ++c)
      if (seen_per_class[c] > 0) rate[c] = static_cast<double>(s.accepted_per_class[c]) / static_cast<double>(seen_per_class[c]);
    j["acceptance_rate"] = rate;
    report.records.write(j);
    report.epochs.push_back(std::move(s));
    std::fill(seen_per_class.begin(), seen_per_class.end(), 0);
  };

  for (const auto& r : trace) {
    if (epoch && r.epoch < *epoch)
      throw InvalidArgument("trace epochs out of order: epoch " + std::to_string(r.epoch) + " after epoch " +
                            std::to_string(*epoch) + " (sample " + r.sample_id + ")");
    if (epoch && r.epoch > *epoch) close_epoch();
    epoch = r.epoch;
    if (r.kind == TraceRecord::Kind::kUnlabeled) {
      if (step && *step != r.step) close_step();
      step = r.step;
    }
    if (static_cast<int>(r.probs.size()) != num_classes)
      throw InvalidArgument("trace record for " + r.sample_id + " has " + std::to_string(r.probs.size()) +
                            " probabilities, expected " + std::to_string(num_classes));
    ProbabilityVector p(r.probs);
    if (r.kind == TraceRecord::Kind::kTeacher) {
      const ClassIndex y = *r.label;
      gate.observe_teacher(std::span(&p, 1), std::span(&y, 1));
    } else {
      ++seen_per_class[static_cast<size_t>(argmax_class(p))];
      (gate.gate(r.sample_id, p).label.accepted ? step_accepted : step_rejected) += 1;
    }
  }
  if (epoch) close_epoch();
  return report;
}

}  // namespace dtsnl
