#pragma once

#include <optional>
#include <string>
#include <vector>

#include "refdense/features.hpp"
#include "refdense/labels.hpp"
#include "refdense/tensor.hpp"

namespace refdense {

struct LossWeights {
  double action = 1.0;
  double ent = 1.0;
  double mot = 1.0;
  double colv = 1.0;
  double temperature = 0.07;  // contrastive temperature, > 0
  // L2-normalize the projected video features before the dot products.
  bool normalize_features = true;
  // Non-paper variant: standard contrastive denominator that also includes
  // the positive classes.
  bool include_positives_in_denominator = false;

  void validate() const;
};

// Per-term values of one loss evaluation. Disabled terms stay empty and are
// omitted from logs.
struct LossBreakdown {
  double action = 0.0;
  std::optional<double> ent_bce;
  std::optional<double> mot_bce;
  std::optional<double> ent_colv;
  std::optional<double> mot_colv;
  double total = 0.0;
};

// Mean over timesteps of the class-summed negative log likelihood; the sum
// runs over classes, the average over time only. Probabilities are clamped
// to [1e-12, 1 - 1e-12] before the logs.
Tensor bce(const Tensor& labels, const Tensor& probs);

struct ColvTerm {
  Tensor value;             // scalar
  int empty_timesteps = 0;  // beta(t) empty: excluded from the average
  int full_timesteps = 0;   // beta(t) = all classes: no negatives, skipped
  bool all_empty = false;   // no positives anywhere -> value 0, flagged
};

// Contrastive co-occurrence loss over one family. `video_feats` must already
// live in the text space (T x Dtxt); rows of `text_rows` are unit norm.
// Per timestep with positives beta(t), averages over e in beta(t) of
// log[ exp(f_t.u_e / tau) / sum_{c not in beta(t)} exp(f_t.u_c / tau) ],
// normalized by the count of timesteps with nonempty beta. The denominator
// excludes positives, so the value may be negative.
ColvTerm colv(const Tensor& video_feats, const Tensor& text_rows,
              const std::vector<std::vector<int>>& beta, double temperature,
              bool include_positives_in_denominator = false);

// What the loss needs from a forward pass. Optional members are present
// only when the corresponding term is enabled.
struct ModelOutputs {
  Tensor action_probs;  // T x C
  std::optional<Tensor> entity_probs;  // T x C_ent
  std::optional<Tensor> motion_probs;  // T x C_mot
  std::optional<Tensor> entity_txt;    // T x Dtxt_ent, projected (+normalized)
  std::optional<Tensor> motion_txt;    // T x Dtxt_mot
};

struct TotalLoss {
  Tensor total;  // scalar, on the tape
  LossBreakdown breakdown;
  int colv_empty_timesteps = 0;
  int colv_full_timesteps = 0;
};

// Weighted sum: w_action * action + w_ent * ent_bce + w_mot * mot_bce
// + w_colv * (ent_colv + mot_colv), restricted to the provided outputs.
TotalLoss total_loss(const ModelOutputs& outputs, const DenseLabelGrid& labels,
                     const SubLabelGrids& sub_labels,
                     const CoOccurrenceSets& cooccurrence,
                     const TextEmbeddingTable& text_table,
                     const LossWeights& weights);

}  // namespace refdense
