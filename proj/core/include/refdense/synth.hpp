#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refdense/labels.hpp"
#include "refdense/tensor.hpp"
#include "refdense/vocabulary.hpp"

namespace refdense {

// Parameters of the compositional synthetic dataset. Action classes are
// built from shared entity and motion prototypes so that classes overlap
// both temporally (instances may co-occur) and semantically (classes share
// sub-concepts).
struct SynthSpec {
  int n_entities = 12;
  int n_motions = 10;
  int n_pair_actions = 30;  // actions with both an entity and a motion
  int n_motion_only = 4;
  int n_entity_only = 0;
  int sequence_length = 64;  // T
  int n_train = 200;
  int n_test = 50;
  double mean_instances = 5.0;   // Poisson mean per sequence
  double mean_duration = 10.0;   // log-normal mean, timesteps
  int max_duration = 24;
  double overlap_target = 0.4;   // min fraction of active timesteps with >= 2 actions
  int segment_feature_dim = 32;  // D, motion prototype space
  int frame_feature_dim = 32;    // frame feature dim, entity prototype space
  double noise_sigma = 0.3;
  std::uint64_t seed = 1;

  int n_actions() const { return n_pair_actions + n_motion_only + n_entity_only; }
  void validate() const;  // throws SchemaError on impossible settings

  std::string to_json() const;
  static SynthSpec from_json(const std::string& text);  // missing keys keep defaults
};

struct SynthSequence {
  std::string id;
  Tensor segment_features;  // T x D
  Tensor frame_features;    // T x frame_dim
  DenseLabelGrid labels;    // T x C
};

struct SynthDataset {
  SynthSpec spec;
  ActionVocabulary vocabulary;
  std::vector<SynthSequence> train;
  std::vector<SynthSequence> test;
  // Prototype vectors double as the text embedding tables (rows unit-norm),
  // so language features genuinely align with the visual features.
  Tensor entity_prototypes;  // C_ent x frame_dim
  Tensor motion_prototypes;  // C_mot x D
};

// Deterministic generation: a pure function of the spec. Sequences draw from
// per-sequence derived seeds, so generation order (or parallel generation)
// cannot change the output. Fails loudly when the overlap target is
// unsatisfiable after bounded retries or an action class never appears in
// the training split.
SynthDataset generate(const SynthSpec& spec);

struct SplitStats {
  std::int64_t timesteps = 0;
  std::int64_t active_timesteps = 0;   // >= 1 active class
  std::int64_t overlap_timesteps = 0;  // >= 2 active classes
  double label_density = 0.0;          // active bits / (T * C)
  std::vector<std::int64_t> cooccurrence_histogram;  // index = active count
  std::vector<std::int64_t> per_class_counts;

  double overlap_fraction() const {
    return active_timesteps == 0
               ? 0.0
               : static_cast<double>(overlap_timesteps) / active_timesteps;
  }
  std::string to_json() const;
};

SplitStats split_stats(const std::vector<SynthSequence>& sequences,
                       int num_classes);

// Writes vocabulary.json, embeddings.blob, per-split labels + feature blobs,
// per-split dataset manifests and a top-level manifest.json with content
// hashes. Returns the top-level manifest path.
std::string write_dataset(const SynthDataset& ds, const std::string& dir);

}  // namespace refdense
