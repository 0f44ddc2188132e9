#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dstdoctor/canonicalize.hpp"
#include "dstdoctor/model.hpp"

namespace dstdoctor {

/// String similarity for fuzzy slot-value matching.
///   full:    1 - lev(a', b') / max(|a'|, |b'|) on normalized strings
///   partial: best full-mode score of the shorter string against any
///            equal-length window of the longer (containment-aware), so a
///            value that merely gains a trailing word still scores 1.0
enum class FuzzyMode { full, partial };

FuzzyMode parse_fuzzy_mode(std::string_view name);
std::string_view to_string(FuzzyMode mode);

std::size_t levenshtein(std::string_view a, std::string_view b);

/// Symmetric, in [0, 1]; equals 1.0 in full mode iff the normalized strings
/// are equal. Not a metric: no triangle inequality is implied.
double similarity(std::string_view a, std::string_view b, FuzzyMode mode,
                  const NormalizationConfig& norm = {});

enum class SlotOutcome { correct, wrong_value, missing, spurious };
std::string_view to_string(SlotOutcome outcome);

struct ScoreConfig {
  double fuzzy_threshold = 0.9;   // in (0, 1]
  FuzzyMode mode = FuzzyMode::partial;
  NormalizationConfig norm;
};

struct TurnScore {
  std::string dialog_id;
  int turn = 0;
  bool exact_joint = false;   // gold == pred as normalized triple sets
  bool fuzzy_joint = false;   // per-slot value similarity >= threshold; implies no
                              // unmatched slot on either side
  // Per-slot classification under exact value comparison, for every slot
  // present on either side.
  std::map<SlotKey, SlotOutcome> slots;
};

/// exact_joint implies fuzzy_joint for any threshold <= 1. In multi-value
/// corpora a predicted value is accepted if it matches any stored
/// alternative for the slot.
TurnScore score_turn(std::span<const SlotTriple> gold, std::span<const SlotTriple> pred,
                     const ScoreConfig& config);

struct EvalResult {
  double jga = 0.0;
  double fuzzy_jga = 0.0;
  double slot_accuracy = 0.0;
  std::uint64_t turn_total = 0;
  std::uint64_t missing_prediction_turns = 0;  // gold turns scored as empty predictions
  double fuzzy_threshold = 0.9;
  FuzzyMode mode = FuzzyMode::partial;
  // Keyed by every slot that was in scope (present on either side) in at
  // least one turn; zero error counts are kept so report rows are stable.
  std::map<SlotKey, std::uint64_t> error_turn_counts;
  std::map<SlotKey, std::uint64_t> in_scope_turns;

  double error_fraction(const SlotKey& key) const;
};

/// jga = fraction of turns with exact_joint; fuzzy_jga analogous.
/// slot_accuracy is computed over (turns x all ontology slot pairs) with
/// correct absence counting as correct. Gold turns without a prediction are
/// scored against an empty state and counted in missing_prediction_turns.
/// Predictions for unknown turns or unknown slots throw.
EvalResult evaluate(const Corpus& gold, const PredictionSet& predictions,
                    const Ontology& ontology, const ScoreConfig& config,
                    unsigned jobs = 1,
                    std::vector<TurnScore>* turn_scores = nullptr);

struct EvalDelta {
  double jga_delta = 0.0;
  double fuzzy_jga_delta = 0.0;
  double slot_accuracy_delta = 0.0;
  struct Row {
    SlotKey key;
    std::uint64_t errors_a = 0, errors_b = 0;
    std::int64_t delta = 0;  // errors_b - errors_a
  };
  std::vector<Row> rows;  // every slot of the shared universe, zero deltas included
};

/// Both results must cover the same slot universe; otherwise throws listing
/// the difference.
EvalDelta compare_evals(const EvalResult& a, const EvalResult& b);

std::string render_eval_summary(const EvalResult& result);
std::string render_eval_per_slot(const EvalResult& result);
std::string render_eval_per_turn(std::span<const TurnScore> scores);
std::string render_eval_delta(const EvalDelta& delta);

void write_eval_result(const EvalResult& result, const std::filesystem::path& summary_path,
                       const std::filesystem::path& per_slot_path);
EvalResult read_eval_result(const std::filesystem::path& summary_path,
                            const std::filesystem::path& per_slot_path);

}  // namespace dstdoctor
