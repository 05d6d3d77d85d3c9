#include "refdense/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "refdense/errors.hpp"
#include "refdense/manifest.hpp"

namespace refdense {

namespace {

using nlohmann::json;

void require_aligned(const std::vector<Tensor>& probs,
                     const std::vector<DenseLabelGrid>& labels) {
  if (probs.size() != labels.size())
    throw DimensionError("metrics: got " + std::to_string(probs.size()) +
                         " prediction tensors for " +
                         std::to_string(labels.size()) + " label grids");
  for (std::size_t s = 0; s < probs.size(); ++s) {
    require_rank(probs[s], 2, "metrics");
    if (probs[s].rows() != labels[s].T || probs[s].cols() != labels[s].C)
      throw DimensionError("metrics: sequence " + std::to_string(s) +
                           " shape mismatch " + shape_str(probs[s].shape()) +
                           " vs labels " + std::to_string(labels[s].T) + "x" +
                           std::to_string(labels[s].C));
  }
}

struct PairStats {
  std::optional<double> ap;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t positives = 0;
};

PairStats score_pair(const std::vector<double>& scores,
                     const std::vector<std::uint8_t>& labels,
                     double threshold) {
  PairStats st;
  st.ap = average_precision(scores, labels);
  if (!st.ap) return st;
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i]) {
      ++st.positives;
      pred ? ++tp : ++fn;
    } else if (pred) {
      ++fp;
    }
  }
  st.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  st.recall = static_cast<double>(tp) / (tp + fn);
  st.f1 = (st.precision + st.recall) > 0.0
              ? 2.0 * st.precision * st.recall / (st.precision + st.recall)
              : 0.0;
  return st;
}

}  // namespace

std::optional<double> average_precision(
    const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw DimensionError("average_precision: " + std::to_string(scores.size()) +
                         " scores vs " + std::to_string(labels.size()) +
                         " labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return scores[a] > scores[b];
                   });
  std::int64_t positives_seen = 0;
  double sum_precision = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]]) {
      ++positives_seen;
      sum_precision += static_cast<double>(positives_seen) / (rank + 1);
    }
  }
  if (positives_seen == 0) return std::nullopt;
  return sum_precision / positives_seen;
}

PerFrameMapResult per_frame_map(const std::vector<Tensor>& probs,
                                const std::vector<DenseLabelGrid>& labels) {
  require_aligned(probs, labels);
  const int C = labels.empty() ? 0 : labels[0].C;
  PerFrameMapResult out;
  double sum = 0.0;
  for (int c = 0; c < C; ++c) {
    std::vector<double> scores;
    std::vector<std::uint8_t> truth;
    for (std::size_t s = 0; s < probs.size(); ++s) {
      for (int t = 0; t < labels[s].T; ++t) {
        scores.push_back(probs[s].at(t, c));
        truth.push_back(labels[s].get(t, c));
      }
    }
    auto ap = average_precision(scores, truth);
    out.per_class_ap.push_back(ap);
    if (ap) {
      sum += *ap;
      ++out.scored_classes;
    } else {
      ++out.skipped_classes;
    }
  }
  out.map = out.scored_classes > 0 ? sum / out.scored_classes : 0.0;
  return out;
}

std::vector<int> conditional_timesteps(const DenseLabelGrid& labels, int j,
                                       int tau) {
  if (tau < 0) throw ConfigError("conditional_timesteps: tau must be >= 0");
  std::vector<int> out;
  int next_active = -1;  // scan with a window; T * window is fine here
  (void)next_active;
  for (int t = 0; t < labels.T; ++t) {
    const int lo = std::max(0, t - tau);
    const int hi = std::min(labels.T - 1, t + tau);
    bool hit = false;
    for (int u = lo; u <= hi && !hit; ++u) hit = labels.get(u, j) != 0;
    if (hit) out.push_back(t);
  }
  return out;
}

ActionConditionalResult action_conditional_suite(
    const std::vector<Tensor>& probs, const std::vector<DenseLabelGrid>& labels,
    int tau, const ActionConditionalOptions& opts) {
  require_aligned(probs, labels);
  ActionConditionalResult out;
  out.tau = tau;
  const int C = labels.empty() ? 0 : labels[0].C;

  // Conditioning sets per (sequence, j), computed once and pooled per pair.
  std::vector<std::vector<std::vector<int>>> cond(probs.size());
  for (std::size_t s = 0; s < probs.size(); ++s) {
    cond[s].resize(C);
    for (int j = 0; j < C; ++j)
      cond[s][j] = conditional_timesteps(labels[s], j, tau);
  }

  double sum_ap = 0.0, sum_p = 0.0, sum_r = 0.0, sum_f1 = 0.0;
  double weight_total = 0.0;
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) {
      if (i == j && !opts.include_self_pairs) continue;
      std::vector<double> scores;
      std::vector<std::uint8_t> truth;
      for (std::size_t s = 0; s < probs.size(); ++s) {
        for (int t : cond[s][j]) {
          scores.push_back(probs[s].at(t, i));
          truth.push_back(labels[s].get(t, i));
        }
      }
      PairStats st = score_pair(scores, truth, opts.threshold);
      if (!st.ap) {
        ++out.skipped_pairs;
        continue;
      }
      const double w =
          opts.weight_by_support ? static_cast<double>(st.positives) : 1.0;
      sum_ap += w * *st.ap;
      sum_p += w * st.precision;
      sum_r += w * st.recall;
      sum_f1 += w * st.f1;
      weight_total += w;
      ++out.qualifying_pairs;
    }
  }
  if (weight_total == 0.0) {
    out.empty = true;
    return out;
  }
  out.map_ac = sum_ap / weight_total;
  out.p_ac = sum_p / weight_total;
  out.r_ac = sum_r / weight_total;
  out.f1_ac = sum_f1 / weight_total;
  return out;
}

EvalReport compute_eval_report(const std::vector<Tensor>& probs,
                               const std::vector<DenseLabelGrid>& labels,
                               const EvalConfig& cfg) {
  EvalReport report;
  report.frame = per_frame_map(probs, labels);
  report.threshold = cfg.conditional.threshold;
  for (int tau : cfg.taus)
    report.conditional.push_back(
        action_conditional_suite(probs, labels, tau, cfg.conditional));
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  json aps = json::array();
  for (const auto& ap : frame.per_class_ap)
    aps.push_back(ap ? json(*ap) : json(nullptr));
  j["per_class_ap"] = std::move(aps);
  j["map"] = frame.map;
  j["scored_classes"] = frame.scored_classes;
  j["skipped_classes"] = frame.skipped_classes;
  j["threshold"] = threshold;
  j["arch_hash"] = hash_hex(arch_hash);
  json cond = json::array();
  for (const auto& c : conditional) {
    json e;
    e["tau"] = c.tau;
    e["map_ac"] = c.map_ac;
    e["f1_ac"] = c.f1_ac;
    e["p_ac"] = c.p_ac;
    e["r_ac"] = c.r_ac;
    e["qualifying_pairs"] = c.qualifying_pairs;
    e["skipped_pairs"] = c.skipped_pairs;
    e["empty"] = c.empty;
    cond.push_back(std::move(e));
  }
  j["conditional"] = std::move(cond);
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("eval report: invalid JSON: ") + e.what());
  }
  EvalReport r;
  for (const auto& ap : j.at("per_class_ap"))
    r.frame.per_class_ap.push_back(
        ap.is_null() ? std::nullopt : std::optional<double>(ap.get<double>()));
  r.frame.map = j.at("map").get<double>();
  r.frame.scored_classes = j.at("scored_classes").get<int>();
  r.frame.skipped_classes = j.at("skipped_classes").get<int>();
  r.threshold = j.at("threshold").get<double>();
  if (j.contains("arch_hash"))
    r.arch_hash = std::stoull(j["arch_hash"].get<std::string>(), nullptr, 16);
  for (const auto& e : j.at("conditional")) {
    ActionConditionalResult c;
    c.tau = e.at("tau").get<int>();
    c.map_ac = e.at("map_ac").get<double>();
    c.f1_ac = e.at("f1_ac").get<double>();
    c.p_ac = e.at("p_ac").get<double>();
    c.r_ac = e.at("r_ac").get<double>();
    c.qualifying_pairs = e.at("qualifying_pairs").get<std::int64_t>();
    c.skipped_pairs = e.at("skipped_pairs").get<std::int64_t>();
    c.empty = e.at("empty").get<bool>();
    r.conditional.push_back(c);
  }
  return r;
}

std::string EvalReport::render_text() const {
  std::ostringstream os;
  auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(1);
    s << 100.0 * v;
    return s.str();
  };
  os << "per-frame mAP: " << pct(frame.map) << "   (classes scored "
     << frame.scored_classes << ", skipped " << frame.skipped_classes << ")\n";
  os << "\n";
  os << "  tau   mAP_ac   F1_ac    P_ac     R_ac     pairs  skipped\n";
  for (const auto& c : conditional) {
    os << "  ";
    std::string tau = std::to_string(c.tau);
    os << tau << std::string(tau.size() < 5 ? 5 - tau.size() : 1, ' ');
    if (c.empty) {
      os << "(no qualifying pairs)\n";
      continue;
    }
    for (double v : {c.map_ac, c.f1_ac, c.p_ac, c.r_ac}) {
      std::string cell = pct(v);
      os << cell << std::string(cell.size() < 9 ? 9 - cell.size() : 1, ' ');
    }
    os << c.qualifying_pairs << "     " << c.skipped_pairs << "\n";
  }
  return os.str();
}

}  // namespace refdense
