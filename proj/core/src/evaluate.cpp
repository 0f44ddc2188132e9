#include "dstdoctor/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "dstdoctor/diagnostics.hpp"
#include "dstdoctor/parallel.hpp"
#include "text_util.hpp"

namespace dstdoctor {

FuzzyMode parse_fuzzy_mode(std::string_view name) {
  if (name == "full") return FuzzyMode::full;
  if (name == "partial") return FuzzyMode::partial;
  throw ParseError("unknown fuzzy mode \"" + std::string(name) + "\"; expected full or partial");
}

std::string_view to_string(FuzzyMode mode) {
  return mode == FuzzyMode::full ? "full" : "partial";
}

std::string_view to_string(SlotOutcome outcome) {
  switch (outcome) {
    case SlotOutcome::correct: return "correct";
    case SlotOutcome::wrong_value: return "wrong_value";
    case SlotOutcome::missing: return "missing";
    case SlotOutcome::spurious: return "spurious";
  }
  return "correct";
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  std::vector<std::size_t> row(a.size() + 1);
  for (std::size_t i = 0; i <= a.size(); ++i) row[i] = i;
  for (std::size_t j = 1; j <= b.size(); ++j) {
    std::size_t diag = row[0];
    row[0] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      std::size_t up = row[i];
      std::size_t subst = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[i] = std::min({row[i - 1] + 1, up + 1, subst});
      diag = up;
    }
  }
  return row[a.size()];
}

namespace {

double full_similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t longest = std::max(a.size(), b.size());
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

double partial_similarity(std::string_view a, std::string_view b) {
  std::string_view shorter = a.size() <= b.size() ? a : b;
  std::string_view longer = a.size() <= b.size() ? b : a;
  if (shorter.empty()) return longer.empty() ? 1.0 : 0.0;
  if (shorter.size() == longer.size()) return full_similarity(shorter, longer);
  double best = 0.0;
  for (std::size_t off = 0; off + shorter.size() <= longer.size(); ++off) {
    best = std::max(best, full_similarity(shorter, longer.substr(off, shorter.size())));
    if (best == 1.0) break;
  }
  return best;
}

}  // namespace

double similarity(std::string_view a, std::string_view b, FuzzyMode mode,
                  const NormalizationConfig& norm) {
  std::string na = normalize_text(a, norm);
  std::string nb = normalize_text(b, norm);
  return mode == FuzzyMode::full ? full_similarity(na, nb) : partial_similarity(na, nb);
}

namespace {

std::string canon(const SlotKey& key, std::string_view raw, const NormalizationConfig& norm) {
  std::string value = normalize_text(raw, norm);
  if (const auto* table = norm.synonyms_for(key)) {
    auto it = table->find(value);
    if (it != table->end()) value = it->second;
  }
  return value;
}

using SlotValues = std::map<SlotKey, std::vector<std::string>>;

SlotValues by_slot(std::span<const SlotTriple> triples, const NormalizationConfig& norm) {
  SlotValues out;
  for (const SlotTriple& t : triples) out[t.key()].push_back(canon(t.key(), t.value, norm));
  for (auto& [key, values] : out) {
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
  }
  return out;
}

}  // namespace

TurnScore score_turn(std::span<const SlotTriple> gold, std::span<const SlotTriple> pred,
                     const ScoreConfig& config) {
  if (config.fuzzy_threshold <= 0.0 || config.fuzzy_threshold > 1.0)
    throw ValidationError("fuzzy threshold must be in (0, 1]");

  SlotValues gold_slots = by_slot(gold, config.norm);
  SlotValues pred_slots = by_slot(pred, config.norm);

  TurnScore score;
  for (const auto& [key, gold_values] : gold_slots) {
    auto it = pred_slots.find(key);
    if (it == pred_slots.end()) {
      score.slots[key] = SlotOutcome::missing;
      continue;
    }
    // A predicted value is exact-correct when it equals one of the stored
    // alternatives; the slot is correct when every predicted value is.
    bool all_match = true;
    for (const std::string& pv : it->second) {
      if (!std::binary_search(gold_values.begin(), gold_values.end(), pv)) {
        all_match = false;
        break;
      }
    }
    score.slots[key] = all_match ? SlotOutcome::correct : SlotOutcome::wrong_value;
  }
  for (const auto& [key, pred_values] : pred_slots) {
    if (gold_slots.count(key) == 0) score.slots[key] = SlotOutcome::spurious;
  }

  score.exact_joint = true;
  for (const auto& [key, outcome] : score.slots) {
    if (outcome != SlotOutcome::correct) {
      score.exact_joint = false;
      break;
    }
  }

  score.fuzzy_joint = true;
  if (gold_slots.size() != pred_slots.size()) score.fuzzy_joint = false;
  if (score.fuzzy_joint) {
    for (const auto& [key, pred_values] : pred_slots) {
      auto it = gold_slots.find(key);
      if (it == gold_slots.end()) {
        score.fuzzy_joint = false;
        break;
      }
      for (const std::string& pv : pred_values) {
        double best = 0.0;
        for (const std::string& gv : it->second) {
          // Both sides already normalized; empty config skips re-normalizing.
          best = std::max(best, config.mode == FuzzyMode::full ? full_similarity(pv, gv)
                                                               : partial_similarity(pv, gv));
          if (best >= config.fuzzy_threshold) break;
        }
        if (best < config.fuzzy_threshold) {
          score.fuzzy_joint = false;
          break;
        }
      }
      if (!score.fuzzy_joint) break;
    }
  }
  return score;
}

double EvalResult::error_fraction(const SlotKey& key) const {
  auto scope = in_scope_turns.find(key);
  if (scope == in_scope_turns.end() || scope->second == 0) return 0.0;
  auto errors = error_turn_counts.find(key);
  std::uint64_t e = errors == error_turn_counts.end() ? 0 : errors->second;
  return static_cast<double>(e) / static_cast<double>(scope->second);
}

EvalResult evaluate(const Corpus& gold, const PredictionSet& predictions,
                    const Ontology& ontology, const ScoreConfig& config, unsigned jobs,
                    std::vector<TurnScore>* turn_scores) {
  for (const auto& [ref, state] : predictions.entries) {
    const Dialog* dialog = gold.find(ref.dialog_id);
    if (dialog == nullptr)
      throw ValidationError("prediction for unknown dialog " + ref.dialog_id);
    if (ref.turn < 0 || ref.turn >= static_cast<int>(dialog->turns.size()))
      throw ValidationError("prediction for dialog " + ref.dialog_id + " turn " +
                            std::to_string(ref.turn) + " which does not exist");
    for (const SlotTriple& triple : state) {
      if (!ontology.has(triple.key()))
        throw ValidationError("prediction for dialog " + ref.dialog_id + " uses slot " +
                              to_string(triple.key()) + " which the ontology does not declare");
    }
  }
  for (const Dialog& dialog : gold.dialogs) {
    for (const DialogTurn& turn : dialog.turns) {
      for (const SlotTriple& triple : turn.state) {
        if (!ontology.has(triple.key()))
          throw ValidationError("gold dialog " + dialog.id + " turn " +
                                std::to_string(turn.index) + " uses slot " +
                                to_string(triple.key()) +
                                " which the ontology does not declare");
      }
    }
  }

  struct DialogScores {
    std::vector<TurnScore> turns;
    std::uint64_t missing = 0;
  };
  std::vector<DialogScores> per_dialog(gold.dialogs.size());
  static const std::vector<SlotTriple> kEmpty;

  parallel_for(gold.dialogs.size(), jobs, [&](std::size_t d) {
    const Dialog& dialog = gold.dialogs[d];
    DialogScores& out = per_dialog[d];
    for (const DialogTurn& turn : dialog.turns) {
      auto it = predictions.entries.find({dialog.id, turn.index});
      const std::vector<SlotTriple>& pred = it == predictions.entries.end() ? kEmpty : it->second;
      if (it == predictions.entries.end()) ++out.missing;
      TurnScore score = score_turn(turn.state, pred, config);
      score.dialog_id = dialog.id;
      score.turn = turn.index;
      out.turns.push_back(std::move(score));
    }
  });

  EvalResult result;
  result.fuzzy_threshold = config.fuzzy_threshold;
  result.mode = config.mode;
  for (const auto& [key, entry] : ontology.entries) {
    result.error_turn_counts[key] = 0;
    result.in_scope_turns[key] = 0;
  }

  std::uint64_t exact = 0, fuzzy = 0, slot_correct = 0;
  for (DialogScores& scores : per_dialog) {
    result.missing_prediction_turns += scores.missing;
    for (TurnScore& score : scores.turns) {
      ++result.turn_total;
      if (score.exact_joint) ++exact;
      if (score.fuzzy_joint) ++fuzzy;
      std::uint64_t in_scope_errors = 0;
      for (const auto& [key, outcome] : score.slots) {
        ++result.in_scope_turns[key];
        if (outcome != SlotOutcome::correct) {
          ++result.error_turn_counts[key];
          ++in_scope_errors;
        }
      }
      // Slots absent from both sides are correct by absence.
      slot_correct += ontology.entries.size() - in_scope_errors;
      if (turn_scores != nullptr) turn_scores->push_back(std::move(score));
    }
  }

  if (result.turn_total > 0) {
    double turns = static_cast<double>(result.turn_total);
    result.jga = static_cast<double>(exact) / turns;
    result.fuzzy_jga = static_cast<double>(fuzzy) / turns;
    result.slot_accuracy = static_cast<double>(slot_correct) /
                           (turns * static_cast<double>(ontology.entries.size()));
  }
  return result;
}

EvalDelta compare_evals(const EvalResult& a, const EvalResult& b) {
  std::vector<std::string> only_a, only_b;
  for (const auto& [key, count] : a.error_turn_counts) {
    if (b.error_turn_counts.count(key) == 0) only_a.push_back(to_string(key));
  }
  for (const auto& [key, count] : b.error_turn_counts) {
    if (a.error_turn_counts.count(key) == 0) only_b.push_back(to_string(key));
  }
  if (!only_a.empty() || !only_b.empty()) {
    std::string message = "results cover different slot universes";
    if (!only_a.empty()) message += "; only in first: " + detail::join(only_a, ", ");
    if (!only_b.empty()) message += "; only in second: " + detail::join(only_b, ", ");
    throw ValidationError(message);
  }

  EvalDelta delta;
  delta.jga_delta = b.jga - a.jga;
  delta.fuzzy_jga_delta = b.fuzzy_jga - a.fuzzy_jga;
  delta.slot_accuracy_delta = b.slot_accuracy - a.slot_accuracy;
  for (const auto& [key, errors_a] : a.error_turn_counts) {
    std::uint64_t errors_b = b.error_turn_counts.at(key);
    delta.rows.push_back({key, errors_a, errors_b,
                          static_cast<std::int64_t>(errors_b) -
                              static_cast<std::int64_t>(errors_a)});
  }
  return delta;
}

std::string render_eval_summary(const EvalResult& result) {
  std::string out;
  out += "jga\t" + detail::format_fixed(result.jga, 6) + "\n";
  out += "fuzzy_jga\t" + detail::format_fixed(result.fuzzy_jga, 6) + "\n";
  out += "slot_accuracy\t" + detail::format_fixed(result.slot_accuracy, 6) + "\n";
  out += "turn_total\t" + std::to_string(result.turn_total) + "\n";
  out += "missing_prediction_turns\t" + std::to_string(result.missing_prediction_turns) + "\n";
  out += "fuzzy_threshold\t" + detail::format_fixed(result.fuzzy_threshold, 6) + "\n";
  out += "fuzzy_mode\t" + std::string(to_string(result.mode)) + "\n";
  return out;
}

std::string render_eval_per_slot(const EvalResult& result) {
  std::string out = "domain\tslot_type\tin_scope_turns\terror_turns\terror_fraction\n";
  for (const auto& [key, in_scope] : result.in_scope_turns) {
    std::uint64_t errors = 0;
    if (auto it = result.error_turn_counts.find(key); it != result.error_turn_counts.end())
      errors = it->second;
    out += key.domain + "\t" + key.slot_type + "\t" + std::to_string(in_scope) + "\t" +
           std::to_string(errors) + "\t" + detail::format_fixed(result.error_fraction(key), 4) +
           "\n";
  }
  return out;
}

std::string render_eval_per_turn(std::span<const TurnScore> scores) {
  std::string out = "dialog_id\tturn\texact_joint\tfuzzy_joint\tslot_errors\n";
  for (const TurnScore& score : scores) {
    std::vector<std::string> errors;
    for (const auto& [key, outcome] : score.slots) {
      if (outcome != SlotOutcome::correct)
        errors.push_back(to_string(key) + ":" + std::string(to_string(outcome)));
    }
    out += score.dialog_id + "\t" + std::to_string(score.turn) + "\t" +
           (score.exact_joint ? "1" : "0") + "\t" + (score.fuzzy_joint ? "1" : "0") + "\t" +
           detail::join(errors, "; ") + "\n";
  }
  return out;
}

std::string render_eval_delta(const EvalDelta& delta) {
  std::string out;
  out += "# jga_delta " + detail::format_fixed(delta.jga_delta, 6) + "\n";
  out += "# fuzzy_jga_delta " + detail::format_fixed(delta.fuzzy_jga_delta, 6) + "\n";
  out += "# slot_accuracy_delta " + detail::format_fixed(delta.slot_accuracy_delta, 6) + "\n";
  out += "domain\tslot_type\terrors_a\terrors_b\tdelta\n";
  for (const EvalDelta::Row& row : delta.rows) {
    out += row.key.domain + "\t" + row.key.slot_type + "\t" + std::to_string(row.errors_a) +
           "\t" + std::to_string(row.errors_b) + "\t" + std::to_string(row.delta) + "\n";
  }
  return out;
}

void write_eval_result(const EvalResult& result, const std::filesystem::path& summary_path,
                       const std::filesystem::path& per_slot_path) {
  detail::write_file_atomic(summary_path, render_eval_summary(result));
  detail::write_file_atomic(per_slot_path, render_eval_per_slot(result));
}

EvalResult read_eval_result(const std::filesystem::path& summary_path,
                            const std::filesystem::path& per_slot_path) {
  EvalResult result;
  for (const std::string& line : detail::read_lines(summary_path)) {
    if (detail::is_skippable_line(line)) continue;
    auto cells = detail::split(line, '\t');
    if (cells.size() != 2)
      throw ParseError(summary_path.filename().string() + ": expected key<TAB>value lines");
    std::string_view key = cells[0], value = cells[1];
    if (key == "jga") result.jga = detail::parse_double(value, "jga");
    else if (key == "fuzzy_jga") result.fuzzy_jga = detail::parse_double(value, "fuzzy_jga");
    else if (key == "slot_accuracy")
      result.slot_accuracy = detail::parse_double(value, "slot_accuracy");
    else if (key == "turn_total") result.turn_total = detail::parse_uint(value, "turn_total");
    else if (key == "missing_prediction_turns")
      result.missing_prediction_turns = detail::parse_uint(value, "missing_prediction_turns");
    else if (key == "fuzzy_threshold")
      result.fuzzy_threshold = detail::parse_double(value, "fuzzy_threshold");
    else if (key == "fuzzy_mode") result.mode = parse_fuzzy_mode(value);
    else
      throw ParseError(summary_path.filename().string() + ": unknown summary key \"" +
                       std::string(key) + "\"");
  }

  bool saw_header = false;
  for (const std::string& line : detail::read_lines(per_slot_path)) {
    if (detail::is_skippable_line(line)) continue;
    if (!saw_header) {
      if (!line.starts_with("domain\t"))
        throw ParseError(per_slot_path.filename().string() + ": expected the per-slot header");
      saw_header = true;
      continue;
    }
    auto cells = detail::split(line, '\t');
    if (cells.size() != 5)
      throw ParseError(per_slot_path.filename().string() + ": expected 5 columns");
    SlotKey key{std::string(cells[0]), std::string(cells[1])};
    result.in_scope_turns[key] = detail::parse_uint(cells[2], "in_scope_turns");
    result.error_turn_counts[key] = detail::parse_uint(cells[3], "error_turns");
  }
  if (!saw_header)
    throw ParseError(per_slot_path.filename().string() + ": missing per-slot header");
  return result;
}

}  // namespace dstdoctor
