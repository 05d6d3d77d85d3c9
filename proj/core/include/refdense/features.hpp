#pragma once

#include <string>
#include <vector>

#include "refdense/blob.hpp"
#include "refdense/labels.hpp"
#include "refdense/random.hpp"
#include "refdense/tensor.hpp"
#include "refdense/vocabulary.hpp"

namespace refdense {

// One validated sequence: segment features, frame features and labels with
// agreeing T. Immutable after load; safe to share across readers.
struct LoadedSequence {
  std::string id;
  Tensor segment_features;  // T x D, blob tensor "F"
  Tensor frame_features;    // T x Dframe, blob tensor "Fimg"
  DenseLabelGrid labels;    // T x C

  int length() const { return labels.T; }
};

// Per-family text embeddings; rows are L2-normalized on load.
struct TextEmbeddingTable {
  Tensor entity_rows;  // C_ent x Dtxt_ent
  Tensor motion_rows;  // C_mot x Dtxt_mot
  std::vector<std::string> entity_prompts;
  std::vector<std::string> motion_prompts;
};

struct Dataset {
  ActionVocabulary vocabulary;
  TextEmbeddingTable text_table;
  std::vector<LoadedSequence> sequences;
};

// Loads a dataset manifest:
//   {"sequences":[{"id","features","frame_features","labels"},...],
//    "text_table":..., "vocabulary":...}
// Paths are resolved relative to the manifest location. Feature dimensions
// are read from the blobs, never assumed.
Dataset load_dataset(const std::string& manifest_path);

// Validates row counts against the vocabulary and normalizes rows.
// Zero rows cannot be normalized and are schema errors.
TextEmbeddingTable load_text_table(const TensorBlob& blob,
                                   const ActionVocabulary& vocab);

// Contiguous random window of length min(t_train, T); evaluation always
// consumes full sequences and never calls this.
LoadedSequence crop_for_training(const LoadedSequence& seq, int t_train,
                                 Rng& rng);

}  // namespace refdense
