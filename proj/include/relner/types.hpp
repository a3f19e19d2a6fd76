#pragma once

#include <compare>
#include <string>
#include <vector>

#include "relner/text.hpp"

namespace relner {

// Entity type label, e.g. PRO, ORG, TEC. Valid labels are declared by the
// active corpus profile; loaders validate against it.
using EntityType = std::string;

// Typed entity with a surface string and character span in its sentence.
// Invariant: sentence.text[start..end) equals surface.
struct EntityMention {
  std::string surface;
  EntityType etype;
  Span span;
  std::string sentence_id;

  auto operator<=>(const EntityMention&) const = default;
};

struct Sentence {
  std::string id;
  std::string text;  // NFC-normalized
  std::vector<EntityMention> gold;
};

struct PredefinedRelation {
  std::string name;
  EntityType head_type;
  EntityType tail_type;

  auto operator<=>(const PredefinedRelation&) const = default;
};

enum class SlotRole { Subject, Object };

inline const char* to_string(SlotRole role) {
  return role == SlotRole::Subject ? "subject" : "object";
}

// One end of an extracted relation pair. Identity is (surface, role) after
// normalization; the same string as subject and as object are distinct
// graph nodes.
struct Slot {
  std::string surface;  // normalized
  SlotRole role = SlotRole::Subject;

  auto operator<=>(const Slot&) const = default;
};

inline Slot make_slot(std::string_view raw_surface, SlotRole role) {
  return Slot{normalize_text(raw_surface), role};
}

}  // namespace relner
