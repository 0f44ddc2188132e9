#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dstdoctor/canonicalize.hpp"
#include "dstdoctor/diagnostics.hpp"
#include "dstdoctor/model.hpp"

namespace dstdoctor {

/// Candidate replacement values for one slot. Values are stored normalized,
/// sorted, and unique; provenance is free text carried into reports.
struct ReplacementPool {
  std::string domain;
  std::string slot_type;
  bool replaceable = true;
  std::string provenance;
  std::vector<std::string> values;

  SlotKey key() const { return {domain, slot_type}; }
};

struct ReplacementLexicon {
  std::map<SlotKey, ReplacementPool> pools;

  const ReplacementPool* find(const SlotKey& key) const;
  bool replaceable(const SlotKey& key) const;
};

ReplacementLexicon load_lexicon(const std::filesystem::path& path,
                                const NormalizationConfig& norm = {});

/// Values that must not appear as replacements: typically every value seen
/// in the training split. Keyed per slot; lookups are against normalized text.
struct SeenValues {
  std::map<SlotKey, std::set<std::string>> by_slot;

  bool contains(const SlotKey& key, std::string_view normalized_value) const;
};

SeenValues collect_seen_values(const Corpus& corpus, const NormalizationConfig& norm = {});

/// One dialog's substitution plan: normalized original -> replacement.
/// The same original string maps to one replacement everywhere it occurs in
/// the dialog, even across slots; distinct originals get distinct replacements.
struct DialogPlan {
  std::string dialog_id;
  std::map<std::string, std::string> mapping;

  bool operator==(const DialogPlan&) const = default;
};

struct ReplacementMap {
  std::uint64_t seed = 0;
  std::vector<DialogPlan> plans;  // sorted by dialog_id

  const DialogPlan* find(std::string_view dialog_id) const;
  bool operator==(const ReplacementMap&) const = default;
};

struct SubstituteConfig {
  NormalizationConfig norm;
  // Slot types never substituted even when a pool exists (times, counts,
  // weekdays: closed classes where novel strings are not well-formed).
  std::set<std::string> protected_slot_types = {"arriveby", "day",    "leaveat",
                                                "people",   "stay",   "time"};
  std::uint64_t seed = 0;
};

/// Plans replacements for every replaceable state value of every dialog.
/// Draws are seeded and sequential over dialogs sorted by id, so the result
/// is a pure function of (corpus, lexicon, seen, config). A dialog value
/// with no admissible candidate (pool exhausted by the seen-filter and the
/// distinctness constraint) keeps itself and a warning is recorded.
ReplacementMap build_replacement_map(const Corpus& corpus, const ReplacementLexicon& lexicon,
                                     const SeenValues& seen, const SubstituteConfig& config,
                                     Diagnostics* diagnostics = nullptr);

/// Applies a plan to states and utterances. State values are rewritten
/// exactly; utterance occurrences are located as word-boundary matches of
/// any synonym variant of the original and rewritten longest-first,
/// right-to-left, so byte offsets stay valid. Overlapping equal-length
/// matches of two different originals throw.
Corpus apply_replacements(const Corpus& corpus, const ReplacementMap& map,
                          const SubstituteConfig& config);

/// Swaps every plan's direction; applying the inverse after the forward map
/// restores the original corpus when no collisions were reported.
ReplacementMap invert(const ReplacementMap& map);

void write_replacement_map(const ReplacementMap& map, const std::filesystem::path& path);
ReplacementMap read_replacement_map(const std::filesystem::path& path);

struct LeakageReport {
  struct Hit {
    std::string dialog_id;
    int turn = 0;
    std::string domain, slot_type, value;  // leaked seen value
    std::string where;                     // "state" | "user" | "system"

    bool operator==(const Hit&) const = default;
  };
  std::vector<Hit> hits;
  std::uint64_t values_checked = 0;

  bool empty() const { return hits.empty(); }
};

/// Scans a substituted corpus for residual seen values on replaceable slots:
/// state values still in `seen`, and utterance mentions of them. Clean output
/// has an empty hit list.
LeakageReport leakage_audit(const Corpus& corpus, const ReplacementLexicon& lexicon,
                            const SeenValues& seen, const SubstituteConfig& config);

std::string render_leakage_report(const LeakageReport& report);

}  // namespace dstdoctor
