#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "refdense/labels.hpp"
#include "refdense/tensor.hpp"

namespace refdense {

// Interpolation-free average precision: sort by descending score (ties keep
// original order), mean of precision at each positive rank. No positives:
// the class is skipped, not scored.
std::optional<double> average_precision(const std::vector<double>& scores,
                                        const std::vector<std::uint8_t>& labels);

struct PerFrameMapResult {
  std::vector<std::optional<double>> per_class_ap;
  double map = 0.0;  // mean over scored classes
  int scored_classes = 0;
  int skipped_classes = 0;
};

// Frames of all sequences pooled per class.
PerFrameMapResult per_frame_map(const std::vector<Tensor>& probs,
                                const std::vector<DenseLabelGrid>& labels);

// Timesteps of one sequence within tau of an occurrence of class j.
std::vector<int> conditional_timesteps(const DenseLabelGrid& labels, int j,
                                       int tau);

struct ActionConditionalOptions {
  double threshold = 0.5;
  bool include_self_pairs = false;   // documented construction: i != j only
  bool weight_by_support = false;    // unweighted mean over pairs by default
};

struct ActionConditionalResult {
  int tau = 0;
  double map_ac = 0.0;
  double f1_ac = 0.0;
  double p_ac = 0.0;
  double r_ac = 0.0;
  std::int64_t qualifying_pairs = 0;
  std::int64_t skipped_pairs = 0;
  bool empty = false;  // no qualifying pair at all
};

// For each ordered class pair (i, j): restrict to timesteps conditioned on j
// (within each sequence, then pooled), require at least one positive of i,
// and score AP plus thresholded precision/recall/F1 of class i there.
// Aggregates are unweighted means over qualifying pairs.
ActionConditionalResult action_conditional_suite(
    const std::vector<Tensor>& probs, const std::vector<DenseLabelGrid>& labels,
    int tau, const ActionConditionalOptions& opts = {});

struct EvalConfig {
  std::vector<int> taus = {0, 20};
  ActionConditionalOptions conditional;
};

struct EvalReport {
  PerFrameMapResult frame;
  std::vector<ActionConditionalResult> conditional;  // one per tau
  double threshold = 0.5;
  std::uint64_t arch_hash = 0;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  // Aligned text rendering: a per-frame mAP line plus one row per tau.
  std::string render_text() const;
};

EvalReport compute_eval_report(const std::vector<Tensor>& probs,
                               const std::vector<DenseLabelGrid>& labels,
                               const EvalConfig& cfg = {});

}  // namespace refdense
