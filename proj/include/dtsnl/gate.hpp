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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtsnl/datamodel.hpp"
#include "dtsnl/dta.hpp"
#include "dtsnl/snl.hpp"

namespace dtsnl {

/// Result of routing one unlabeled sample through the gate.
struct GateOutcome {
  PseudoLabel label;
  std::vector<ClassIndex> new_negatives;  // empty when accepted or SNL is off
};

/// What the gate did over one epoch, and the thresholds it leaves for the next.
struct GateEpochSummary {
  int64_t epoch = 0;
  std::vector<double> thresholds;
  std::vector<int64_t> accepted_per_class;
  int64_t rejected = 0;
  int64_t library_total = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["epoch"] = epoch;
    j["thresholds"] = thresholds;
    j["accepted_per_class"] = accepted_per_class;
    j["rejected"] = rejected;
    j["library_total"] = library_total;
    return j;
  }
};

/// Threshold gating plus complementary-label mining, fed with probability
/// vectors only. The trainer drives it with live network outputs and the audit
/// tool drives it with a recorded trace; both go through this one class.
class ThresholdGate {
 public:
  ThresholdGate(int num_classes, DtaConfig dta, SnlConfig snl)
      : dta_(dta),
        snl_(snl),
        state_(ThresholdState::initial(num_classes, dta.tau_init, dta.mu)),
        acc_(num_classes),
        store_(num_classes),
        accepted_per_class_(static_cast<size_t>(num_classes), 0) {
    dta_.validate();
    snl_.validate();
  }

  GateOutcome gate(const std::string& sample_id, const ProbabilityVector& p_avg) {
    GateOutcome out{accept_pseudo_label(p_avg, state_, sample_id), {}};
    if (out.label.accepted) {
      ++accepted_per_class_[static_cast<size_t>(out.label.class_index)];
    } else {
      ++rejected_;
      if (snl_.enabled) {
        out.new_negatives = extract_complementary(p_avg, store_.get(sample_id), snl_.delta);
        store_.update(sample_id, out.new_negatives);
      }
    }
    return out;
  }

  void observe_teacher(std::span<const ProbabilityVector> probs, std::span<const ClassIndex> labels) {
    collect_class_confidences(acc_, probs, labels);
  }

  /// Finalizes thresholds (when dynamic thresholds are on) and closes the epoch.
  GateEpochSummary end_epoch() {
    if (dta_.enabled) {
      state_ = finalize_thresholds(state_, acc_);
    } else {
      acc_.reset();
      ++state_.epoch;
    }
    GateEpochSummary s{state_.epoch, state_.tau, accepted_per_class_, rejected_,
                       static_cast<int64_t>(store_.total_negatives())};
    std::fill(accepted_per_class_.begin(), accepted_per_class_.end(), 0);
    rejected_ = 0;
    return s;
  }

  const ThresholdState& state() const { return state_; }
  ThresholdState& mutable_state() { return state_; }
  const ComplementaryLabelStore& store() const { return store_; }
  ComplementaryLabelStore& mutable_store() { return store_; }
  const ClassConfidenceAccumulator& accumulator() const { return acc_; }
  const DtaConfig& dta() const { return dta_; }
  const SnlConfig& snl() const { return snl_; }

 private:
  DtaConfig dta_;
  SnlConfig snl_;
  ThresholdState state_;
  ClassConfidenceAccumulator acc_;
  ComplementaryLabelStore store_;
  std::vector<int64_t> accepted_per_class_;
  int64_t rejected_ = 0;
};

}  // namespace dtsnl
