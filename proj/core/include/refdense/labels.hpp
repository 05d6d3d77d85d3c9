#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "refdense/tensor.hpp"
#include "refdense/vocabulary.hpp"

namespace refdense {

// Per-timestep multi-hot label grid: T rows, C classes, any number of
// simultaneously active classes per row.
struct DenseLabelGrid {
  int T = 0;
  int C = 0;
  std::vector<std::uint8_t> bits;  // row-major T*C, entries in {0,1}

  DenseLabelGrid() = default;
  DenseLabelGrid(int t, int c) : T(t), C(c), bits(static_cast<std::size_t>(t) * c, 0) {}

  std::uint8_t get(int t, int c) const {
    return bits[static_cast<std::size_t>(t) * C + c];
  }
  void set(int t, int c, bool on = true) {
    bits[static_cast<std::size_t>(t) * C + c] = on ? 1 : 0;
  }
  void set_interval(int c, int t_begin, int t_end) {  // [t_begin, t_end)
    for (int t = t_begin; t < t_end; ++t) set(t, c);
  }

  // (T,C) tensor of 0/1 reals.
  Tensor to_tensor() const;
};

struct SubLabelGrids {
  DenseLabelGrid entity;  // T x C_ent
  DenseLabelGrid motion;  // T x C_mot
};

// beta(t) per family: indices of classes active at each timestep.
struct CoOccurrenceSets {
  std::vector<std::vector<int>> entity;
  std::vector<std::vector<int>> motion;
};

// OR-projection of action labels through the decomposition mapping. Output
// boundaries are exactly the union of the source action boundaries per
// sub-class.
SubLabelGrids decompose_labels(const DenseLabelGrid& actions,
                               const ActionVocabulary& vocab);

CoOccurrenceSets cooccurrence_sets(const SubLabelGrids& sub);
std::vector<std::vector<int>> active_sets(const DenseLabelGrid& grid);

// --- NDJSON label files ----------------------------------------------------
// One record per sequence: {"id":..., "T":..., "active":[[t,c],...]}.

struct LabelRecord {
  std::string id;
  DenseLabelGrid grid;
};

std::vector<LabelRecord> parse_label_records(const std::string& ndjson_text,
                                             int num_classes);
std::vector<LabelRecord> load_label_file(const std::string& path,
                                         int num_classes);
void save_label_file(const std::vector<LabelRecord>& records,
                     const std::string& path);

}  // namespace refdense
