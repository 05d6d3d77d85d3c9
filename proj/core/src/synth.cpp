#include "refdense/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "refdense/blob.hpp"
#include "refdense/errors.hpp"
#include "refdense/manifest.hpp"
#include "refdense/random.hpp"

namespace refdense {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

Tensor unit_prototypes(int count, int dim, Rng& rng) {
  std::vector<double> vals(static_cast<std::size_t>(count) * dim);
  for (int i = 0; i < count; ++i) {
    double norm = 0.0;
    for (int j = 0; j < dim; ++j) {
      double v = rng.normal();
      vals[static_cast<std::size_t>(i) * dim + j] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < dim; ++j)
      vals[static_cast<std::size_t>(i) * dim + j] /= norm;
  }
  return Tensor::from({count, dim}, std::move(vals));
}

ActionVocabulary build_vocabulary(const SynthSpec& spec, Rng& rng) {
  ActionVocabulary vocab;
  for (int e = 0; e < spec.n_entities; ++e)
    vocab.entities.push_back("entity_" + zero_pad(e, 2));
  for (int m = 0; m < spec.n_motions; ++m)
    vocab.motions.push_back("motion_" + zero_pad(m, 2));
  vocab.entity_texts = vocab.entities;
  vocab.motion_texts = vocab.motions;

  // Base pairs cover every entity and motion, the rest are sampled without
  // replacement from the remaining grid.
  std::set<std::pair<int, int>> used;
  std::vector<std::pair<int, int>> pairs;
  const int base = std::max(spec.n_entities, spec.n_motions);
  for (int i = 0; i < base && i < spec.n_pair_actions; ++i) {
    std::pair<int, int> p{i % spec.n_entities, i % spec.n_motions};
    if (used.insert(p).second) pairs.push_back(p);
  }
  while (static_cast<int>(pairs.size()) < spec.n_pair_actions) {
    std::pair<int, int> p{
        static_cast<int>(rng.uniform_index(spec.n_entities)),
        static_cast<int>(rng.uniform_index(spec.n_motions))};
    if (used.insert(p).second) pairs.push_back(p);
  }
  for (auto [e, m] : pairs) {
    ActionClass a;
    a.name = "act_e" + zero_pad(e, 2) + "_m" + zero_pad(m, 2);
    a.entity = e;
    a.motion = m;
    vocab.actions.push_back(std::move(a));
  }

  // Single-component actions; distinct sub-classes within each group.
  std::vector<int> motion_ids(spec.n_motions);
  for (int m = 0; m < spec.n_motions; ++m) motion_ids[m] = m;
  rng.shuffle(motion_ids);
  for (int k = 0; k < spec.n_motion_only; ++k) {
    ActionClass a;
    a.name = "act_m" + zero_pad(motion_ids[k], 2) + "_solo";
    a.motion = motion_ids[k];
    vocab.actions.push_back(std::move(a));
  }
  std::vector<int> entity_ids(spec.n_entities);
  for (int e = 0; e < spec.n_entities; ++e) entity_ids[e] = e;
  rng.shuffle(entity_ids);
  for (int k = 0; k < spec.n_entity_only; ++k) {
    ActionClass a;
    a.name = "act_e" + zero_pad(entity_ids[k], 2) + "_solo";
    a.entity = entity_ids[k];
    vocab.actions.push_back(std::move(a));
  }
  return vocab;
}

constexpr int kMaxSequenceAttempts = 64;

SynthSequence generate_sequence(const SynthSpec& spec,
                                const ActionVocabulary& vocab,
                                const Tensor& proto_ent,
                                const Tensor& proto_mot,
                                const std::string& id, std::uint64_t seq_seed) {
  Rng rng(seq_seed);
  const int T = spec.sequence_length;
  const int C = vocab.num_actions();
  const double dur_sigma = 0.5;
  const double dur_mu = std::log(spec.mean_duration) - 0.5 * dur_sigma * dur_sigma;

  DenseLabelGrid labels;
  bool accepted = false;
  for (int attempt = 0; attempt < kMaxSequenceAttempts && !accepted; ++attempt) {
    labels = DenseLabelGrid(T, C);
    const int instances = rng.poisson(spec.mean_instances);
    for (int k = 0; k < instances; ++k) {
      const int action = static_cast<int>(rng.uniform_index(C));
      int dur = static_cast<int>(std::llround(rng.log_normal(dur_mu, dur_sigma)));
      dur = std::clamp(dur, 2, std::min(spec.max_duration, T));
      const int start = static_cast<int>(rng.uniform_index(T - dur + 1));
      labels.set_interval(action, start, start + dur);
    }
    std::int64_t active = 0, overlap = 0;
    for (int t = 0; t < T; ++t) {
      int on = 0;
      for (int c = 0; c < C; ++c) on += labels.get(t, c);
      if (on >= 1) ++active;
      if (on >= 2) ++overlap;
    }
    accepted = overlap >= spec.overlap_target * active;
  }
  if (!accepted)
    throw DataError("synth: overlap target " +
                    std::to_string(spec.overlap_target) +
                    " unsatisfiable for sequence " + id + " after " +
                    std::to_string(kMaxSequenceAttempts) + " attempts");

  const SubLabelGrids sub = decompose_labels(labels, vocab);
  const int d_frame = spec.frame_feature_dim;
  const int d_seg = spec.segment_feature_dim;

  // Frame features: instantaneous sum of active entity prototypes.
  std::vector<double> frame(static_cast<std::size_t>(T) * d_frame, 0.0);
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < sub.entity.C; ++e)
      if (sub.entity.get(t, e))
        for (int j = 0; j < d_frame; ++j)
          frame[static_cast<std::size_t>(t) * d_frame + j] += proto_ent.at(e, j);

  // Segment features: sum of active motion prototypes, smoothed by a
  // width-3 zero-padded moving average so motion evidence is temporal.
  std::vector<double> raw(static_cast<std::size_t>(T) * d_seg, 0.0);
  for (int t = 0; t < T; ++t)
    for (int m = 0; m < sub.motion.C; ++m)
      if (sub.motion.get(t, m))
        for (int j = 0; j < d_seg; ++j)
          raw[static_cast<std::size_t>(t) * d_seg + j] += proto_mot.at(m, j);
  std::vector<double> seg(static_cast<std::size_t>(T) * d_seg, 0.0);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < d_seg; ++j) {
      double acc = raw[static_cast<std::size_t>(t) * d_seg + j];
      if (t > 0) acc += raw[static_cast<std::size_t>(t - 1) * d_seg + j];
      if (t + 1 < T) acc += raw[static_cast<std::size_t>(t + 1) * d_seg + j];
      seg[static_cast<std::size_t>(t) * d_seg + j] = acc / 3.0;
    }

  if (spec.noise_sigma > 0.0) {
    for (auto& v : frame) v += spec.noise_sigma * rng.normal();
    for (auto& v : seg) v += spec.noise_sigma * rng.normal();
  }

  SynthSequence out;
  out.id = id;
  out.labels = std::move(labels);
  out.frame_features = Tensor::from({T, d_frame}, std::move(frame));
  out.segment_features = Tensor::from({T, d_seg}, std::move(seg));
  return out;
}

json spec_to_json_obj(const SynthSpec& s) {
  json j;
  j["n_entities"] = s.n_entities;
  j["n_motions"] = s.n_motions;
  j["n_pair_actions"] = s.n_pair_actions;
  j["n_motion_only"] = s.n_motion_only;
  j["n_entity_only"] = s.n_entity_only;
  j["sequence_length"] = s.sequence_length;
  j["n_train"] = s.n_train;
  j["n_test"] = s.n_test;
  j["mean_instances"] = s.mean_instances;
  j["mean_duration"] = s.mean_duration;
  j["max_duration"] = s.max_duration;
  j["overlap_target"] = s.overlap_target;
  j["segment_feature_dim"] = s.segment_feature_dim;
  j["frame_feature_dim"] = s.frame_feature_dim;
  j["noise_sigma"] = s.noise_sigma;
  j["seed"] = s.seed;
  return j;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_entities < 1 || n_motions < 1)
    throw SchemaError("synth spec: need at least one entity and one motion");
  if (n_pair_actions > n_entities * n_motions)
    throw SchemaError("synth spec: n_pair_actions " +
                      std::to_string(n_pair_actions) + " exceeds " +
                      std::to_string(n_entities * n_motions) +
                      " available (entity, motion) pairs");
  if (n_pair_actions < std::max(n_entities, n_motions))
    throw SchemaError(
        "synth spec: n_pair_actions must be >= max(n_entities, n_motions) so "
        "every sub-class is referenced");
  if (n_motion_only > n_motions || n_entity_only > n_entities)
    throw SchemaError("synth spec: single-component action count exceeds "
                      "available sub-classes");
  if (sequence_length < 4) throw SchemaError("synth spec: sequence_length < 4");
  if (n_train < 1 || n_test < 1)
    throw SchemaError("synth spec: need at least one sequence per split");
  if (mean_duration < 1.0 || max_duration < 2)
    throw SchemaError("synth spec: durations too small");
  if (overlap_target < 0.0 || overlap_target >= 1.0)
    throw SchemaError("synth spec: overlap_target must be in [0, 1)");
  if (segment_feature_dim < 1 || frame_feature_dim < 1)
    throw SchemaError("synth spec: feature dims must be positive");
  if (noise_sigma < 0.0) throw SchemaError("synth spec: negative noise sigma");
}

std::string SynthSpec::to_json() const { return spec_to_json_obj(*this).dump(2); }

SynthSpec SynthSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("synth spec: invalid JSON: ") + e.what());
  }
  SynthSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("n_entities", s.n_entities);
  get("n_motions", s.n_motions);
  get("n_pair_actions", s.n_pair_actions);
  get("n_motion_only", s.n_motion_only);
  get("n_entity_only", s.n_entity_only);
  get("sequence_length", s.sequence_length);
  get("n_train", s.n_train);
  get("n_test", s.n_test);
  get("mean_instances", s.mean_instances);
  get("mean_duration", s.mean_duration);
  get("max_duration", s.max_duration);
  get("overlap_target", s.overlap_target);
  get("segment_feature_dim", s.segment_feature_dim);
  get("frame_feature_dim", s.frame_feature_dim);
  get("noise_sigma", s.noise_sigma);
  get("seed", s.seed);
  s.validate();
  return s;
}

SynthDataset generate(const SynthSpec& spec) {
  spec.validate();
  SynthDataset ds;
  ds.spec = spec;

  // Stream 0: vocabulary + prototypes. Streams 1.. : one per sequence.
  Rng setup_rng(Rng::derive_seed(spec.seed, 0));
  ds.vocabulary = build_vocabulary(spec, setup_rng);
  ds.entity_prototypes =
      unit_prototypes(spec.n_entities, spec.frame_feature_dim, setup_rng);
  ds.motion_prototypes =
      unit_prototypes(spec.n_motions, spec.segment_feature_dim, setup_rng);

  for (int i = 0; i < spec.n_train; ++i) {
    ds.train.push_back(generate_sequence(
        spec, ds.vocabulary, ds.entity_prototypes, ds.motion_prototypes,
        "train_" + zero_pad(i, 4), Rng::derive_seed(spec.seed, 1 + i)));
  }
  for (int i = 0; i < spec.n_test; ++i) {
    ds.test.push_back(generate_sequence(
        spec, ds.vocabulary, ds.entity_prototypes, ds.motion_prototypes,
        "test_" + zero_pad(i, 4),
        Rng::derive_seed(spec.seed, 1 + spec.n_train + i)));
  }

  SplitStats train_stats = split_stats(ds.train, ds.vocabulary.num_actions());
  for (int c = 0; c < ds.vocabulary.num_actions(); ++c) {
    if (train_stats.per_class_counts[c] == 0)
      throw DataError("synth: action class " + ds.vocabulary.actions[c].name +
                      " never appears in the training split");
  }
  return ds;
}

SplitStats split_stats(const std::vector<SynthSequence>& sequences,
                       int num_classes) {
  SplitStats stats;
  stats.per_class_counts.assign(num_classes, 0);
  stats.cooccurrence_histogram.assign(num_classes + 1, 0);
  std::int64_t active_bits = 0;
  for (const auto& seq : sequences) {
    for (int t = 0; t < seq.labels.T; ++t) {
      int on = 0;
      for (int c = 0; c < num_classes; ++c) {
        if (seq.labels.get(t, c)) {
          ++on;
          ++stats.per_class_counts[c];
        }
      }
      ++stats.timesteps;
      active_bits += on;
      ++stats.cooccurrence_histogram[on];
      if (on >= 1) ++stats.active_timesteps;
      if (on >= 2) ++stats.overlap_timesteps;
    }
  }
  stats.label_density =
      stats.timesteps == 0
          ? 0.0
          : static_cast<double>(active_bits) / (stats.timesteps * num_classes);
  return stats;
}

std::string SplitStats::to_json() const {
  json j;
  j["timesteps"] = timesteps;
  j["active_timesteps"] = active_timesteps;
  j["overlap_timesteps"] = overlap_timesteps;
  j["overlap_fraction"] = overlap_fraction();
  j["label_density"] = label_density;
  j["cooccurrence_histogram"] = cooccurrence_histogram;
  j["per_class_counts"] = per_class_counts;
  return j.dump(2);
}

std::string write_dataset(const SynthDataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "train");
  fs::create_directories(fs::path(dir) / "test");

  save_vocabulary(ds.vocabulary, (fs::path(dir) / "vocabulary.json").string());
  TensorBlob embeddings;
  embeddings.add("u_ent", ds.entity_prototypes);
  embeddings.add("u_mot", ds.motion_prototypes);
  embeddings.save((fs::path(dir) / "embeddings.blob").string());

  json top;
  top["spec"] = json::parse(ds.spec.to_json());
  json files = json::object();
  auto record_file = [&](const std::string& rel) {
    files[rel] =
        "fnv1a64:" + hash_hex(hash_file((fs::path(dir) / rel).string()));
  };
  record_file("vocabulary.json");
  record_file("embeddings.blob");

  for (const auto* split : {"train", "test"}) {
    const auto& sequences =
        std::string(split) == "train" ? ds.train : ds.test;
    std::vector<LabelRecord> records;
    json manifest;
    manifest["vocabulary"] = "vocabulary.json";
    manifest["text_table"] = "embeddings.blob";
    json seq_list = json::array();
    for (const auto& seq : sequences) {
      const std::string rel_blob = std::string(split) + "/" + seq.id + ".blob";
      TensorBlob blob;
      blob.add("F", seq.segment_features);
      blob.add("Fimg", seq.frame_features);
      blob.save((fs::path(dir) / rel_blob).string());
      records.push_back({seq.id, seq.labels});
      json entry;
      entry["id"] = seq.id;
      entry["features"] = rel_blob;
      entry["frame_features"] = rel_blob;
      entry["labels"] = std::string(split) + "/labels.ndjson";
      seq_list.push_back(std::move(entry));
      record_file(rel_blob);
    }
    manifest["sequences"] = std::move(seq_list);
    const std::string rel_labels = std::string(split) + "/labels.ndjson";
    save_label_file(records, (fs::path(dir) / rel_labels).string());
    record_file(rel_labels);

    const std::string rel_manifest = "manifest_" + std::string(split) + ".json";
    std::ofstream os(fs::path(dir) / rel_manifest);
    if (!os) throw IoError("write_dataset: cannot write " + rel_manifest);
    os << manifest.dump(2) << "\n";
    os.close();
    record_file(rel_manifest);

    top["stats"][split] = json::parse(
        split_stats(sequences, ds.vocabulary.num_actions()).to_json());
    top["splits"][split] = rel_manifest;
  }

  top["files"] = std::move(files);
  const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
  std::ofstream os(manifest_path);
  if (!os) throw IoError("write_dataset: cannot write manifest.json");
  os << top.dump(2) << "\n";
  return manifest_path;
}

}  // namespace refdense
