#pragma once

#include <optional>
#include <string>
#include <vector>

namespace refdense {

// One action class plus its decomposition into sub-concepts. Indices refer
// into ActionVocabulary::entities / motions; an action carries at least one
// of the two.
struct ActionClass {
  std::string name;
  std::optional<int> entity;
  std::optional<int> motion;
  std::string text;  // optional descriptive phrase from the mapping file
};

// Action classes plus the action -> (entity, motion) decomposition mapping.
// Entity/motion class lists are ordered by first reference unless the
// mapping file pins them explicitly. Immutable after load.
struct ActionVocabulary {
  std::vector<ActionClass> actions;
  std::vector<std::string> entities;
  std::vector<std::string> motions;
  // Phrase per sub-concept class used in prompt strings; defaults to the
  // class name.
  std::vector<std::string> entity_texts;
  std::vector<std::string> motion_texts;

  int num_actions() const { return static_cast<int>(actions.size()); }
  int num_entities() const { return static_cast<int>(entities.size()); }
  int num_motions() const { return static_cast<int>(motions.size()); }

  // "a photo of <phrase>" for class c of family ent/mot.
  std::string prompt_entity(int c) const;
  std::string prompt_motion(int c) const;
};

// Parses and validates the vocabulary JSON:
//   {"actions":[{"name":..., "entity":..., "motion":..., "text":...}, ...],
//    "entities":[...optional explicit order...],
//    "motions":[...optional explicit order...]}
// Schema errors: action with neither component, duplicate names, dangling
// or unreferenced explicit entity/motion entries.
ActionVocabulary parse_vocabulary(const std::string& json_text);
ActionVocabulary load_vocabulary(const std::string& path);
std::string vocabulary_to_json(const ActionVocabulary& vocab);
void save_vocabulary(const ActionVocabulary& vocab, const std::string& path);

}  // namespace refdense
