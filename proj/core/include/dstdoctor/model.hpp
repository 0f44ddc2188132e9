#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dstdoctor/diagnostics.hpp"

namespace dstdoctor {

/// A (domain, slot type) pair, e.g. ("hotel", "pricerange"). Domains and
/// slot types are lowercase identifier tokens: [a-z0-9_]+.
struct SlotKey {
  std::string domain;
  std::string slot_type;

  auto operator<=>(const SlotKey&) const = default;
};

std::string to_string(const SlotKey& key);              // "hotel.pricerange"
SlotKey parse_slot_key(std::string_view text);          // throws ParseError

/// One dialog-state fact: (domain, slot type, value). The value is stored
/// exactly as written in the source data; normalization happens on
/// comparison, never on storage.
struct SlotTriple {
  std::string domain;
  std::string slot_type;
  std::string value;

  SlotKey key() const { return {domain, slot_type}; }
  auto operator<=>(const SlotTriple&) const = default;
};

std::string to_string(const SlotTriple& triple);        // "hotel.pricerange=moderate"
SlotTriple parse_slot_triple(std::string_view text);    // throws ParseError

struct DialogTurn {
  int index = 0;
  std::string user;     // raw user utterance
  std::string system;   // raw system response; may be empty on the final turn
  // Cumulative belief state up to and including this turn, sorted by
  // (domain, slot_type, value). At most one value per (domain, slot_type)
  // unless the corpus was loaded in multi-value mode.
  std::vector<SlotTriple> state;

  bool operator==(const DialogTurn&) const = default;

  /// Values held for `key` (zero or one in single-value mode).
  std::vector<std::string> values(const SlotKey& key) const;
  bool has_slot(const SlotKey& key) const;
};

struct Dialog {
  std::string id;
  std::vector<std::string> domains;   // sorted, unique
  std::vector<DialogTurn> turns;      // indices consecutive from 0

  bool operator==(const Dialog&) const = default;
  bool has_domain(std::string_view domain) const;
};

struct Corpus {
  std::string split = "test";        // one of {train, valid, test}
  std::vector<Dialog> dialogs;       // sorted lexicographically by id

  bool operator==(const Corpus&) const = default;
  const Dialog* find(std::string_view id) const;
};

struct OntologyEntry {
  bool categorical = false;
  std::vector<std::string> values;   // normalized, sorted, unique
};

/// Legal values per (domain, slot type). Values are normalized at load so
/// that membership tests compare like with like.
struct Ontology {
  std::map<SlotKey, OntologyEntry> entries;
  std::size_t categorical_cap = 50;  // categorical entries must stay below this

  bool has(const SlotKey& key) const { return entries.count(key) != 0; }
  const OntologyEntry* find(const SlotKey& key) const;
  bool contains_value(const SlotKey& key, std::string_view normalized_value) const;
};

/// One backing entity, e.g. a hotel: slot type -> raw value.
using EntityRecord = std::map<std::string, std::string>;

struct EntityDatabase {
  std::map<std::string, std::vector<EntityRecord>> records;  // domain -> entities
};

struct TurnRef {
  std::string dialog_id;
  int turn = 0;

  auto operator<=>(const TurnRef&) const = default;
};

/// Model outputs to score: per gold turn, the predicted belief state.
struct PredictionSet {
  std::map<TurnRef, std::vector<SlotTriple>> entries;
};

/// Reports triples that disappear between consecutive turns without being
/// overwritten for the same (domain, slot type). Non-monotone states are
/// legal in source data, so this only reports.
Diagnostics check_cumulative_states(const Corpus& corpus);

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  }
  return true;
}

}  // namespace dstdoctor
