#include "refdense/labels.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "refdense/errors.hpp"

namespace refdense {

using nlohmann::json;

Tensor DenseLabelGrid::to_tensor() const {
  std::vector<double> vals(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i)
    vals[i] = static_cast<double>(bits[i]);
  return Tensor::from({T, C}, std::move(vals));
}

SubLabelGrids decompose_labels(const DenseLabelGrid& actions,
                               const ActionVocabulary& vocab) {
  if (actions.C != vocab.num_actions())
    throw DimensionError("decompose_labels: grid has " +
                         std::to_string(actions.C) + " classes, vocabulary " +
                         std::to_string(vocab.num_actions()));
  SubLabelGrids out;
  out.entity = DenseLabelGrid(actions.T, vocab.num_entities());
  out.motion = DenseLabelGrid(actions.T, vocab.num_motions());
  for (int t = 0; t < actions.T; ++t) {
    for (int a = 0; a < actions.C; ++a) {
      if (!actions.get(t, a)) continue;
      const ActionClass& cls = vocab.actions[a];
      if (cls.entity) out.entity.set(t, *cls.entity);
      if (cls.motion) out.motion.set(t, *cls.motion);
    }
  }
  return out;
}

std::vector<std::vector<int>> active_sets(const DenseLabelGrid& grid) {
  std::vector<std::vector<int>> sets(grid.T);
  for (int t = 0; t < grid.T; ++t)
    for (int c = 0; c < grid.C; ++c)
      if (grid.get(t, c)) sets[t].push_back(c);
  return sets;
}

CoOccurrenceSets cooccurrence_sets(const SubLabelGrids& sub) {
  return {active_sets(sub.entity), active_sets(sub.motion)};
}

std::vector<LabelRecord> parse_label_records(const std::string& ndjson_text,
                                             int num_classes) {
  std::vector<LabelRecord> records;
  std::istringstream is(ndjson_text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError("labels: line " + std::to_string(line_no) +
                        " is not valid JSON: " + e.what());
    }
    if (!doc.contains("id") || !doc.contains("T") || !doc.contains("active"))
      throw SchemaError("labels: line " + std::to_string(line_no) +
                        " missing id/T/active");
    LabelRecord rec;
    rec.id = doc["id"].get<std::string>();
    const int T = doc["T"].get<int>();
    if (T < 1)
      throw SchemaError("labels: sequence " + rec.id + " has T < 1");
    rec.grid = DenseLabelGrid(T, num_classes);
    for (const auto& pair : doc["active"]) {
      if (!pair.is_array() || pair.size() != 2)
        throw SchemaError("labels: sequence " + rec.id +
                          " has a malformed active entry");
      const int t = pair[0].get<int>();
      const int c = pair[1].get<int>();
      if (t < 0 || t >= T || c < 0 || c >= num_classes)
        throw SchemaError("labels: sequence " + rec.id + " entry (" +
                          std::to_string(t) + "," + std::to_string(c) +
                          ") out of range");
      rec.grid.set(t, c);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<LabelRecord> load_label_file(const std::string& path,
                                         int num_classes) {
  std::ifstream is(path);
  if (!is) throw IoError("labels: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_label_records(buf.str(), num_classes);
}

void save_label_file(const std::vector<LabelRecord>& records,
                     const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("labels: cannot open for write: " + path);
  for (const auto& rec : records) {
    json doc;
    doc["id"] = rec.id;
    doc["T"] = rec.grid.T;
    json active = json::array();
    for (int t = 0; t < rec.grid.T; ++t)
      for (int c = 0; c < rec.grid.C; ++c)
        if (rec.grid.get(t, c)) active.push_back(json::array({t, c}));
    doc["active"] = std::move(active);
    os << doc.dump() << "\n";
  }
  if (!os) throw IoError("labels: write failed: " + path);
}

}  // namespace refdense
