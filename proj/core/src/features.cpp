#include "refdense/features.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "refdense/errors.hpp"

namespace refdense {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Tensor normalize_rows_checked(const Tensor& rows, const char* family) {
  const int m = rows.rows(), n = rows.cols();
  std::vector<double> out(rows.values());
  for (int i = 0; i < m; ++i) {
    double norm = 0.0;
    for (int j = 0; j < n; ++j) {
      double v = out[static_cast<std::size_t>(i) * n + j];
      norm += v * v;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0)
      throw SchemaError(std::string("text table: ") + family + " row " +
                        std::to_string(i) + " is all zeros, cannot normalize");
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] /= norm;
  }
  return Tensor::from(rows.shape(), std::move(out));
}

}  // namespace

TextEmbeddingTable load_text_table(const TensorBlob& blob,
                                   const ActionVocabulary& vocab) {
  Tensor ent = blob.get("u_ent");
  Tensor mot = blob.get("u_mot");
  require_rank(ent, 2, "load_text_table");
  require_rank(mot, 2, "load_text_table");
  if (ent.rows() != vocab.num_entities())
    throw SchemaError("text table: u_ent has " + std::to_string(ent.rows()) +
                      " rows, vocabulary has " +
                      std::to_string(vocab.num_entities()) + " entities");
  if (mot.rows() != vocab.num_motions())
    throw SchemaError("text table: u_mot has " + std::to_string(mot.rows()) +
                      " rows, vocabulary has " +
                      std::to_string(vocab.num_motions()) + " motions");
  TextEmbeddingTable table;
  table.entity_rows = normalize_rows_checked(ent, "entity");
  table.motion_rows = normalize_rows_checked(mot, "motion");
  for (int c = 0; c < vocab.num_entities(); ++c)
    table.entity_prompts.push_back(vocab.prompt_entity(c));
  for (int c = 0; c < vocab.num_motions(); ++c)
    table.motion_prompts.push_back(vocab.prompt_motion(c));
  return table;
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw IoError("dataset manifest: cannot open " + manifest_path);
  json doc;
  try {
    is >> doc;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("dataset manifest: invalid JSON: ") +
                      e.what());
  }
  for (const char* key : {"sequences", "text_table", "vocabulary"})
    if (!doc.contains(key))
      throw SchemaError(std::string("dataset manifest: missing \"") + key +
                        "\"");

  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& rel) {
    return (base / rel).string();
  };

  Dataset ds;
  ds.vocabulary = load_vocabulary(resolve(doc["vocabulary"].get<std::string>()));
  ds.text_table = load_text_table(
      TensorBlob::load(resolve(doc["text_table"].get<std::string>())),
      ds.vocabulary);

  // Label files hold one record per sequence; parse each file once.
  std::unordered_map<std::string, std::vector<LabelRecord>> label_cache;
  auto labels_for = [&](const std::string& path,
                        const std::string& id) -> const DenseLabelGrid& {
    auto it = label_cache.find(path);
    if (it == label_cache.end())
      it = label_cache
               .emplace(path,
                        load_label_file(path, ds.vocabulary.num_actions()))
               .first;
    for (const auto& rec : it->second)
      if (rec.id == id) return rec.grid;
    throw SchemaError("dataset manifest: sequence " + id +
                      " has no record in " + path);
  };

  for (const auto& entry : doc["sequences"]) {
    LoadedSequence seq;
    seq.id = entry["id"].get<std::string>();
    TensorBlob fblob = TensorBlob::load(
        resolve(entry["features"].get<std::string>()));
    seq.segment_features = fblob.get("F");
    const std::string frame_path = entry["frame_features"].get<std::string>();
    TensorBlob imgblob = frame_path == entry["features"].get<std::string>()
                             ? fblob
                             : TensorBlob::load(resolve(frame_path));
    seq.frame_features = imgblob.get("Fimg");
    seq.labels = labels_for(resolve(entry["labels"].get<std::string>()), seq.id);

    require_rank(seq.segment_features, 2, "load_sequence");
    require_rank(seq.frame_features, 2, "load_sequence");
    if (seq.segment_features.rows() != seq.labels.T ||
        seq.frame_features.rows() != seq.labels.T)
      throw DataError("sequence " + seq.id + ": T mismatch, features " +
                      std::to_string(seq.segment_features.rows()) + "/" +
                      std::to_string(seq.frame_features.rows()) + " vs labels " +
                      std::to_string(seq.labels.T));
    if (!all_finite(seq.segment_features) || !all_finite(seq.frame_features))
      throw DataError("sequence " + seq.id + ": non-finite feature values");
    if (!ds.sequences.empty()) {
      if (seq.segment_features.cols() != ds.sequences[0].segment_features.cols() ||
          seq.frame_features.cols() != ds.sequences[0].frame_features.cols())
        throw DataError("sequence " + seq.id +
                        ": feature dimension differs from the rest of the set");
    }
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty())
    throw SchemaError("dataset manifest: no sequences listed");
  return ds;
}

LoadedSequence crop_for_training(const LoadedSequence& seq, int t_train,
                                 Rng& rng) {
  if (t_train < 1) throw ConfigError("crop_for_training: t_train must be >= 1");
  const int T = seq.length();
  const int len = std::min(t_train, T);
  const int start = static_cast<int>(rng.uniform_index(T - len + 1));

  LoadedSequence out;
  out.id = seq.id;
  auto crop_rows = [&](const Tensor& t) {
    const int d = t.cols();
    std::vector<double> vals(static_cast<std::size_t>(len) * d);
    std::copy(t.values().begin() + static_cast<std::size_t>(start) * d,
              t.values().begin() + static_cast<std::size_t>(start + len) * d,
              vals.begin());
    return Tensor::from({len, d}, std::move(vals));
  };
  out.segment_features = crop_rows(seq.segment_features);
  out.frame_features = crop_rows(seq.frame_features);
  out.labels = DenseLabelGrid(len, seq.labels.C);
  for (int t = 0; t < len; ++t)
    for (int c = 0; c < seq.labels.C; ++c)
      if (seq.labels.get(start + t, c)) out.labels.set(t, c);
  return out;
}

}  // namespace refdense
