#include "refdense/vocabulary.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "refdense/errors.hpp"

namespace refdense {

namespace {

using nlohmann::json;

int intern(const std::string& name, std::vector<std::string>& list,
           std::unordered_map<std::string, int>& index, bool allow_new,
           const char* family) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  if (!allow_new)
    throw SchemaError(std::string("vocabulary: dangling ") + family +
                      " reference \"" + name + "\"");
  int id = static_cast<int>(list.size());
  list.push_back(name);
  index.emplace(name, id);
  return id;
}

}  // namespace

std::string ActionVocabulary::prompt_entity(int c) const {
  return "a photo of " + entity_texts.at(c);
}

std::string ActionVocabulary::prompt_motion(int c) const {
  return "a photo of " + motion_texts.at(c);
}

ActionVocabulary parse_vocabulary(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("vocabulary: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("actions") ||
      !doc["actions"].is_array())
    throw SchemaError("vocabulary: expected object with \"actions\" array");

  ActionVocabulary vocab;
  std::unordered_map<std::string, int> entity_index;
  std::unordered_map<std::string, int> motion_index;

  // Explicit class lists pin the index order; references must stay inside.
  const bool explicit_entities = doc.contains("entities");
  const bool explicit_motions = doc.contains("motions");
  if (explicit_entities) {
    for (const auto& e : doc["entities"]) {
      std::string name = e.get<std::string>();
      if (entity_index.count(name))
        throw SchemaError("vocabulary: duplicate entity \"" + name + "\"");
      entity_index.emplace(name, static_cast<int>(vocab.entities.size()));
      vocab.entities.push_back(std::move(name));
    }
  }
  if (explicit_motions) {
    for (const auto& m : doc["motions"]) {
      std::string name = m.get<std::string>();
      if (motion_index.count(name))
        throw SchemaError("vocabulary: duplicate motion \"" + name + "\"");
      motion_index.emplace(name, static_cast<int>(vocab.motions.size()));
      vocab.motions.push_back(std::move(name));
    }
  }

  std::unordered_set<std::string> action_names;
  for (const auto& entry : doc["actions"]) {
    if (!entry.is_object() || !entry.contains("name"))
      throw SchemaError("vocabulary: action entry without \"name\"");
    ActionClass a;
    a.name = entry["name"].get<std::string>();
    if (!action_names.insert(a.name).second)
      throw SchemaError("vocabulary: duplicate action \"" + a.name + "\"");
    if (entry.contains("entity") && !entry["entity"].is_null())
      a.entity = intern(entry["entity"].get<std::string>(), vocab.entities,
                        entity_index, !explicit_entities, "entity");
    if (entry.contains("motion") && !entry["motion"].is_null())
      a.motion = intern(entry["motion"].get<std::string>(), vocab.motions,
                        motion_index, !explicit_motions, "motion");
    if (entry.contains("text") && !entry["text"].is_null())
      a.text = entry["text"].get<std::string>();
    if (!a.entity && !a.motion)
      throw SchemaError("vocabulary: action \"" + a.name +
                        "\" has neither an entity nor a motion component");
    vocab.actions.push_back(std::move(a));
  }
  if (vocab.actions.empty())
    throw SchemaError("vocabulary: no actions defined");

  // Every listed class must be referenced by at least one action, which also
  // keeps the class counts bounded by the action count.
  std::vector<bool> entity_used(vocab.entities.size(), false);
  std::vector<bool> motion_used(vocab.motions.size(), false);
  for (const auto& a : vocab.actions) {
    if (a.entity) entity_used[*a.entity] = true;
    if (a.motion) motion_used[*a.motion] = true;
  }
  for (std::size_t i = 0; i < entity_used.size(); ++i)
    if (!entity_used[i])
      throw SchemaError("vocabulary: entity \"" + vocab.entities[i] +
                        "\" is never referenced by an action");
  for (std::size_t i = 0; i < motion_used.size(); ++i)
    if (!motion_used[i])
      throw SchemaError("vocabulary: motion \"" + vocab.motions[i] +
                        "\" is never referenced by an action");

  // Prompt phrases: class name unless the first action introducing the class
  // supplied a descriptive text.
  vocab.entity_texts = vocab.entities;
  vocab.motion_texts = vocab.motions;
  std::vector<bool> entity_text_set(vocab.entities.size(), false);
  std::vector<bool> motion_text_set(vocab.motions.size(), false);
  for (const auto& a : vocab.actions) {
    if (a.text.empty()) continue;
    if (a.entity && !entity_text_set[*a.entity]) {
      vocab.entity_texts[*a.entity] = a.text;
      entity_text_set[*a.entity] = true;
    }
    if (a.motion && !motion_text_set[*a.motion]) {
      vocab.motion_texts[*a.motion] = a.text;
      motion_text_set[*a.motion] = true;
    }
  }
  return vocab;
}

ActionVocabulary load_vocabulary(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("vocabulary: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_vocabulary(buf.str());
}

std::string vocabulary_to_json(const ActionVocabulary& vocab) {
  json doc;
  doc["entities"] = vocab.entities;
  doc["motions"] = vocab.motions;
  json actions = json::array();
  for (const auto& a : vocab.actions) {
    json e;
    e["name"] = a.name;
    if (a.entity) e["entity"] = vocab.entities[*a.entity];
    if (a.motion) e["motion"] = vocab.motions[*a.motion];
    if (!a.text.empty()) e["text"] = a.text;
    actions.push_back(std::move(e));
  }
  doc["actions"] = std::move(actions);
  return doc.dump(2);
}

void save_vocabulary(const ActionVocabulary& vocab, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("vocabulary: cannot open for write: " + path);
  os << vocabulary_to_json(vocab) << "\n";
}

}  // namespace refdense
