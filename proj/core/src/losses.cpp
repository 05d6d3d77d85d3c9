#include "refdense/losses.hpp"

#include <algorithm>

#include "refdense/errors.hpp"
#include "refdense/ops.hpp"

namespace refdense {

namespace {

constexpr double kProbEps = 1e-12;

}  // namespace

void LossWeights::validate() const {
  if (temperature <= 0.0)
    throw ConfigError("loss weights: temperature must be positive");
  if (action < 0.0 || ent < 0.0 || mot < 0.0 || colv < 0.0)
    throw ConfigError("loss weights: weights must be nonnegative");
}

Tensor bce(const Tensor& labels, const Tensor& probs) {
  require_same_shape(labels, probs, "bce");
  require_rank(probs, 2, "bce");
  const int T = probs.rows();
  Tensor p = clamp(probs, kProbEps, 1.0 - kProbEps);
  Tensor one = Tensor::full(probs.shape(), 1.0);
  Tensor pos = mul(labels, log(p));
  Tensor neg = mul(sub(one, labels), log(sub(one, p)));
  return scale(sum_all(add(pos, neg)), -1.0 / T);
}

ColvTerm colv(const Tensor& video_feats, const Tensor& text_rows,
              const std::vector<std::vector<int>>& beta, double temperature,
              bool include_positives_in_denominator) {
  require_rank(video_feats, 2, "colv");
  require_rank(text_rows, 2, "colv");
  if (video_feats.cols() != text_rows.cols())
    throw DimensionError("colv: feature dim " + shape_str(video_feats.shape()) +
                         " does not match text rows " +
                         shape_str(text_rows.shape()));
  const int T = video_feats.rows();
  const int C = text_rows.rows();
  if (static_cast<int>(beta.size()) != T)
    throw DimensionError("colv: beta has " + std::to_string(beta.size()) +
                         " timesteps, features have " + std::to_string(T));
  if (temperature <= 0.0) throw ConfigError("colv: temperature must be positive");

  ColvTerm term;
  // T' counts timesteps with nonempty beta; timesteps whose denominator
  // would be empty (beta = full set) contribute nothing but stay counted.
  int nonempty = 0;
  std::vector<std::uint8_t> neg_mask(static_cast<std::size_t>(T) * C, 0);
  std::vector<double> pos_weight(static_cast<std::size_t>(T) * C, 0.0);
  std::vector<std::uint8_t> is_pos(C);
  for (int t = 0; t < T; ++t) {
    const auto& b = beta[t];
    if (b.empty()) {
      ++term.empty_timesteps;
      continue;
    }
    ++nonempty;
    if (static_cast<int>(b.size()) == C && !include_positives_in_denominator) {
      ++term.full_timesteps;
      continue;
    }
    std::fill(is_pos.begin(), is_pos.end(), 0);
    for (int e : b) {
      if (e < 0 || e >= C)
        throw DimensionError("colv: beta index " + std::to_string(e) +
                             " out of range for " + std::to_string(C) +
                             " classes");
      is_pos[e] = 1;
    }
    for (int c = 0; c < C; ++c) {
      const std::size_t idx = static_cast<std::size_t>(t) * C + c;
      if (is_pos[c]) pos_weight[idx] = 1.0 / static_cast<double>(b.size());
      if (include_positives_in_denominator || !is_pos[c]) neg_mask[idx] = 1;
    }
  }

  if (nonempty == 0) {
    term.value = Tensor::scalar(0.0);
    term.all_empty = true;
    return term;
  }

  Tensor scores =
      scale(matmul(video_feats, transpose(text_rows)), 1.0 / temperature);
  Tensor positive_part =
      row_sums(mul(scores, Tensor::from({T, C}, std::move(pos_weight))));
  Tensor lse = rowwise_logsumexp_masked(scores, neg_mask);

  // Row weights fold the skip rules and the -1/T' normalization together.
  std::vector<double> row_weight(T, 0.0);
  for (int t = 0; t < T; ++t) {
    const auto& b = beta[t];
    const bool skipped =
        b.empty() || (static_cast<int>(b.size()) == C &&
                      !include_positives_in_denominator);
    if (!skipped) row_weight[t] = -1.0 / static_cast<double>(nonempty);
  }
  term.value = sum_all(
      mul(sub(positive_part, lse), Tensor::from({T}, std::move(row_weight))));
  return term;
}

TotalLoss total_loss(const ModelOutputs& outputs, const DenseLabelGrid& labels,
                     const SubLabelGrids& sub_labels,
                     const CoOccurrenceSets& cooccurrence,
                     const TextEmbeddingTable& text_table,
                     const LossWeights& weights) {
  weights.validate();
  TotalLoss out;

  Tensor action_term = bce(labels.to_tensor(), outputs.action_probs);
  out.breakdown.action = action_term.value();
  Tensor total = scale(action_term, weights.action);

  if (outputs.entity_probs) {
    Tensor term = bce(sub_labels.entity.to_tensor(), *outputs.entity_probs);
    out.breakdown.ent_bce = term.value();
    total = add(total, scale(term, weights.ent));
  }
  if (outputs.motion_probs) {
    Tensor term = bce(sub_labels.motion.to_tensor(), *outputs.motion_probs);
    out.breakdown.mot_bce = term.value();
    total = add(total, scale(term, weights.mot));
  }
  if (outputs.entity_txt) {
    ColvTerm term = colv(*outputs.entity_txt, text_table.entity_rows,
                         cooccurrence.entity, weights.temperature,
                         weights.include_positives_in_denominator);
    out.breakdown.ent_colv = term.value.value();
    out.colv_empty_timesteps += term.empty_timesteps;
    out.colv_full_timesteps += term.full_timesteps;
    total = add(total, scale(term.value, weights.colv));
  }
  if (outputs.motion_txt) {
    ColvTerm term = colv(*outputs.motion_txt, text_table.motion_rows,
                         cooccurrence.motion, weights.temperature,
                         weights.include_positives_in_denominator);
    out.breakdown.mot_colv = term.value.value();
    out.colv_empty_timesteps += term.empty_timesteps;
    out.colv_full_timesteps += term.full_timesteps;
    total = add(total, scale(term.value, weights.colv));
  }

  out.total = total;
  out.breakdown.total = total.value();
  return out;
}

}  // namespace refdense
