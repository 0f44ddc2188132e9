#include "dstdoctor/substitute.hpp"

#include <algorithm>
#include <random>
#include <tuple>

#include "text_util.hpp"

namespace dstdoctor {

const ReplacementPool* ReplacementLexicon::find(const SlotKey& key) const {
  auto it = pools.find(key);
  return it == pools.end() ? nullptr : &it->second;
}

bool ReplacementLexicon::replaceable(const SlotKey& key) const {
  const ReplacementPool* pool = find(key);
  return pool != nullptr && pool->replaceable;
}

ReplacementLexicon load_lexicon(const std::filesystem::path& path,
                                const NormalizationConfig& norm) {
  ReplacementLexicon lexicon;
  auto lines = detail::read_lines(path);
  auto context = [&](std::size_t i) {
    return path.filename().string() + ":" + std::to_string(i + 1);
  };

  std::optional<ReplacementPool> open;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = detail::trim(lines[i]);
    if (detail::is_skippable_line(line)) continue;
    if (line.starts_with("pool ")) {
      if (open) throw ParseError(context(i) + ": pool block not closed with end");
      SlotKey key;
      try {
        key = parse_slot_key(detail::trim(line.substr(5)));
      } catch (const ParseError& e) {
        throw ParseError(context(i) + ": " + e.what());
      }
      if (lexicon.pools.count(key) != 0)
        throw ParseError(context(i) + ": duplicate pool " + to_string(key));
      open = ReplacementPool{};
      open->domain = key.domain;
      open->slot_type = key.slot_type;
      continue;
    }
    if (!open) throw ParseError(context(i) + ": expected a pool block");
    if (line.starts_with("replaceable ")) {
      std::string_view v = detail::trim(line.substr(12));
      if (v == "true") open->replaceable = true;
      else if (v == "false") open->replaceable = false;
      else throw ParseError(context(i) + ": replaceable must be true or false");
      continue;
    }
    if (line.starts_with("provenance ")) {
      open->provenance = std::string(detail::trim(line.substr(11)));
      continue;
    }
    if (line.starts_with("value ")) {
      std::string value = normalize_text(detail::trim(line.substr(6)), norm);
      if (value.empty()) throw ParseError(context(i) + ": value normalizes to nothing");
      open->values.push_back(std::move(value));
      continue;
    }
    if (line == "end") {
      std::sort(open->values.begin(), open->values.end());
      open->values.erase(std::unique(open->values.begin(), open->values.end()),
                         open->values.end());
      if (open->replaceable && open->values.empty())
        throw ParseError(context(i) + ": replaceable pool " + to_string(open->key()) +
                         " lists no values");
      lexicon.pools.emplace(open->key(), std::move(*open));
      open.reset();
      continue;
    }
    throw ParseError(context(i) + ": unrecognized line \"" + std::string(line) + "\"");
  }
  if (open) throw ParseError(path.filename().string() + ": unterminated pool block");
  return lexicon;
}

bool SeenValues::contains(const SlotKey& key, std::string_view normalized_value) const {
  auto it = by_slot.find(key);
  if (it == by_slot.end()) return false;
  return it->second.count(std::string(normalized_value)) != 0;
}

SeenValues collect_seen_values(const Corpus& corpus, const NormalizationConfig& norm) {
  SeenValues seen;
  for (const Dialog& dialog : corpus.dialogs) {
    for (const DialogTurn& turn : dialog.turns) {
      for (const SlotTriple& triple : turn.state)
        seen.by_slot[triple.key()].insert(normalize_text(triple.value, norm));
    }
  }
  return seen;
}

const DialogPlan* ReplacementMap::find(std::string_view dialog_id) const {
  auto it = std::lower_bound(plans.begin(), plans.end(), dialog_id,
                             [](const DialogPlan& p, std::string_view id) {
                               return p.dialog_id < id;
                             });
  if (it == plans.end() || it->dialog_id != dialog_id) return nullptr;
  return &*it;
}

namespace {

bool slot_in_scope(const SlotKey& key, const ReplacementLexicon& lexicon,
                   const SubstituteConfig& config) {
  return config.protected_slot_types.count(key.slot_type) == 0 && lexicon.replaceable(key);
}

}  // namespace

ReplacementMap build_replacement_map(const Corpus& corpus, const ReplacementLexicon& lexicon,
                                     const SeenValues& seen, const SubstituteConfig& config,
                                     Diagnostics* diagnostics) {
  ReplacementMap map;
  map.seed = config.seed;
  std::mt19937_64 rng(config.seed);

  for (const Dialog& dialog : corpus.dialogs) {
    // One original can sit under several slots (a venue named in both the
    // hotel and the taxi frame); it gets one replacement that every such
    // slot's pool must offer.
    std::map<std::string, std::set<SlotKey>> originals;
    for (const DialogTurn& turn : dialog.turns) {
      for (const SlotTriple& triple : turn.state) {
        if (!slot_in_scope(triple.key(), lexicon, config)) continue;
        originals[normalize_text(triple.value, config.norm)].insert(triple.key());
      }
    }
    if (originals.empty()) continue;

    DialogPlan plan;
    plan.dialog_id = dialog.id;
    std::set<std::string> excluded;  // dialog originals and already-drawn picks
    for (const auto& [original, keys] : originals) excluded.insert(original);

    for (const auto& [original, keys] : originals) {
      std::vector<std::string> candidates;
      bool first = true;
      for (const SlotKey& key : keys) {
        const std::vector<std::string>& pool = lexicon.find(key)->values;
        if (first) {
          candidates = pool;
          first = false;
        } else {
          std::vector<std::string> narrowed;
          std::set_intersection(candidates.begin(), candidates.end(), pool.begin(), pool.end(),
                                std::back_inserter(narrowed));
          candidates = std::move(narrowed);
        }
      }
      std::vector<std::string> admissible;
      for (const std::string& candidate : candidates) {
        if (excluded.count(candidate) != 0) continue;
        bool leaks = false;
        for (const SlotKey& key : keys) {
          if (seen.contains(key, candidate)) {
            leaks = true;
            break;
          }
        }
        if (!leaks) admissible.push_back(candidate);
      }
      if (admissible.empty()) {
        std::vector<std::string> names;
        for (const SlotKey& key : keys) names.push_back(to_string(key));
        append(diagnostics,
               {Severity::warning, "dialog " + dialog.id,
                "no admissible replacement for \"" + original + "\" (" +
                    detail::join(names, ", ") + "); keeping the original"});
        continue;
      }
      const std::string& pick =
          admissible[static_cast<std::size_t>(detail::bounded_rand(rng, admissible.size()))];
      plan.mapping.emplace(original, pick);
      excluded.insert(pick);
    }
    if (!plan.mapping.empty()) map.plans.push_back(std::move(plan));
  }
  return map;
}

namespace {

/// Word-boundary scanner for the surface forms of a plan's originals:
/// the original itself plus every synonym variant that canonicalizes to it
/// in any slot's table.
class SurfaceScanner {
 public:
  SurfaceScanner(const DialogPlan& plan, const NormalizationConfig& norm) {
    for (const auto& [original, replacement] : plan.mapping) add(original, original);
    for (const auto& [key, table] : norm.synonyms) {
      for (const auto& [variant, target] : table) {
        if (plan.mapping.count(target) != 0) add(variant, target);
      }
    }
  }

  struct Occurrence {
    std::size_t token_begin = 0, token_count = 0;
    std::size_t begin = 0, end = 0;  // raw byte span
    std::string original;
  };

  std::vector<Occurrence> scan(const NormalizedText& nt,
                               const std::vector<TokenSpan>& tokens) const {
    auto token_text = [&](std::size_t i) {
      return std::string_view(nt.text).substr(tokens[i].begin, tokens[i].end - tokens[i].begin);
    };
    std::vector<Occurrence> found;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = by_first_.find(token_text(i));
      if (it == by_first_.end()) continue;
      for (const Form& form : it->second) {
        if (i + form.tokens.size() > tokens.size()) continue;
        bool matched = true;
        for (std::size_t k = 1; k < form.tokens.size(); ++k) {
          if (token_text(i + k) != form.tokens[k]) {
            matched = false;
            break;
          }
        }
        if (matched) {
          found.push_back({i, form.tokens.size(), tokens[i].raw_begin,
                           tokens[i + form.tokens.size() - 1].raw_end, form.original});
        }
      }
    }
    return found;
  }

 private:
  struct Form {
    std::vector<std::string> tokens;
    std::string original;
  };

  void add(const std::string& surface, const std::string& original) {
    Form form;
    for (std::string_view token : detail::split_ws(surface)) form.tokens.emplace_back(token);
    if (form.tokens.empty()) return;
    form.original = original;
    std::vector<Form>& bucket = by_first_[form.tokens.front()];
    for (const Form& existing : bucket) {
      if (existing.tokens == form.tokens && existing.original == original) return;
    }
    bucket.push_back(std::move(form));
  }

  std::map<std::string, std::vector<Form>, std::less<>> by_first_;
};

std::string rewrite_utterance(const std::string& raw, const SurfaceScanner& scanner,
                              const DialogPlan& plan, const NormalizationConfig& norm,
                              const std::string& where) {
  NormalizedText nt = normalize_with_map(raw, norm);
  std::vector<TokenSpan> tokens = tokenize(nt);
  std::vector<SurfaceScanner::Occurrence> found = scanner.scan(nt, tokens);
  if (found.empty()) return raw;

  // Longest matches claim their text first; a tie between different
  // originals over the same tokens has no faithful rewrite.
  std::sort(found.begin(), found.end(),
            [](const SurfaceScanner::Occurrence& a, const SurfaceScanner::Occurrence& b) {
              if (a.token_count != b.token_count) return a.token_count > b.token_count;
              if (a.token_begin != b.token_begin) return a.token_begin < b.token_begin;
              return a.original < b.original;
            });
  std::vector<SurfaceScanner::Occurrence> kept;
  for (const SurfaceScanner::Occurrence& occ : found) {
    bool conflict = false;
    for (const SurfaceScanner::Occurrence& k : kept) {
      if (occ.token_begin < k.token_begin + k.token_count &&
          k.token_begin < occ.token_begin + occ.token_count) {
        if (k.token_count == occ.token_count && k.original != occ.original) {
          throw ValidationError(where + ": overlapping equal-length mentions of \"" +
                                k.original + "\" and \"" + occ.original + "\"");
        }
        conflict = true;
        break;
      }
    }
    if (!conflict) kept.push_back(occ);
  }

  std::sort(kept.begin(), kept.end(),
            [](const SurfaceScanner::Occurrence& a, const SurfaceScanner::Occurrence& b) {
              return a.begin > b.begin;  // right to left keeps byte offsets valid
            });
  std::string out = raw;
  for (const SurfaceScanner::Occurrence& occ : kept) {
    out.replace(occ.begin, occ.end - occ.begin, plan.mapping.at(occ.original));
  }
  return out;
}

}  // namespace

Corpus apply_replacements(const Corpus& corpus, const ReplacementMap& map,
                          const SubstituteConfig& config) {
  Corpus out = corpus;
  for (Dialog& dialog : out.dialogs) {
    const DialogPlan* plan = map.find(dialog.id);
    if (plan == nullptr || plan->mapping.empty()) continue;
    SurfaceScanner scanner(*plan, config.norm);

    for (DialogTurn& turn : dialog.turns) {
      std::string where = "dialog " + dialog.id + " turn " + std::to_string(turn.index);
      for (SlotTriple& triple : turn.state) {
        auto it = plan->mapping.find(normalize_text(triple.value, config.norm));
        if (it != plan->mapping.end()) triple.value = it->second;
      }
      std::sort(turn.state.begin(), turn.state.end());
      turn.user = rewrite_utterance(turn.user, scanner, *plan, config.norm, where + " user");
      turn.system = rewrite_utterance(turn.system, scanner, *plan, config.norm, where + " system");
    }
  }
  return out;
}

ReplacementMap invert(const ReplacementMap& map) {
  ReplacementMap inverse;
  inverse.seed = map.seed;
  for (const DialogPlan& plan : map.plans) {
    DialogPlan swapped;
    swapped.dialog_id = plan.dialog_id;
    for (const auto& [original, replacement] : plan.mapping) {
      if (!swapped.mapping.emplace(replacement, original).second)
        throw ValidationError("plan for dialog " + plan.dialog_id +
                              " reuses replacement \"" + replacement + "\"");
    }
    inverse.plans.push_back(std::move(swapped));
  }
  return inverse;
}

void write_replacement_map(const ReplacementMap& map, const std::filesystem::path& path) {
  std::string out = "# seed " + std::to_string(map.seed) + "\n";
  out += "dialog_id\toriginal\treplacement\n";
  for (const DialogPlan& plan : map.plans) {
    for (const auto& [original, replacement] : plan.mapping) {
      out += plan.dialog_id + "\t" + detail::tsv_escape(original) + "\t" +
             detail::tsv_escape(replacement) + "\n";
    }
  }
  detail::write_file_atomic(path, out);
}

ReplacementMap read_replacement_map(const std::filesystem::path& path) {
  ReplacementMap map;
  bool saw_header = false;
  auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    std::string_view trimmed = detail::trim(line);
    if (trimmed.starts_with("# seed ")) {
      map.seed = detail::parse_uint(detail::trim(trimmed.substr(7)), "seed");
      continue;
    }
    if (detail::is_skippable_line(line)) continue;
    if (!saw_header) {
      if (!line.starts_with("dialog_id\t"))
        throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                         ": expected the replacement map header");
      saw_header = true;
      continue;
    }
    auto cells = detail::split(line, '\t');
    if (cells.size() != 3)
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": expected 3 columns");
    std::string dialog_id(cells[0]);
    if (map.plans.empty() || map.plans.back().dialog_id != dialog_id) {
      if (!map.plans.empty() && map.plans.back().dialog_id > dialog_id)
        throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                         ": rows must be grouped by dialog id in ascending order");
      map.plans.push_back({dialog_id, {}});
    }
    auto [it, inserted] = map.plans.back().mapping.emplace(detail::tsv_unescape(cells[1]),
                                                           detail::tsv_unescape(cells[2]));
    if (!inserted)
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": duplicate original \"" + it->first + "\" for dialog " + dialog_id);
  }
  if (!saw_header) throw ParseError(path.filename().string() + ": missing replacement map header");
  return map;
}

LeakageReport leakage_audit(const Corpus& corpus, const ReplacementLexicon& lexicon,
                            const SeenValues& seen, const SubstituteConfig& config) {
  LeakageReport report;

  struct Probe {
    std::vector<std::string> tokens;
    SlotKey key;
    std::string value;
  };
  std::map<std::string, std::vector<Probe>, std::less<>> by_first;
  for (const auto& [key, values] : seen.by_slot) {
    if (!slot_in_scope(key, lexicon, config)) continue;
    for (const std::string& value : values) {
      Probe probe;
      for (std::string_view token : detail::split_ws(value)) probe.tokens.emplace_back(token);
      if (probe.tokens.empty()) continue;
      probe.key = key;
      probe.value = value;
      ++report.values_checked;
      by_first[probe.tokens.front()].push_back(std::move(probe));
    }
  }

  auto scan_text = [&](const Dialog& dialog, int turn, const std::string& raw,
                       const char* where) {
    NormalizedText nt = normalize_with_map(raw, config.norm);
    std::vector<TokenSpan> tokens = tokenize(nt);
    auto token_text = [&](std::size_t i) {
      return std::string_view(nt.text).substr(tokens[i].begin, tokens[i].end - tokens[i].begin);
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = by_first.find(token_text(i));
      if (it == by_first.end()) continue;
      for (const Probe& probe : it->second) {
        if (!dialog.has_domain(probe.key.domain)) continue;
        if (i + probe.tokens.size() > tokens.size()) continue;
        bool matched = true;
        for (std::size_t k = 1; k < probe.tokens.size(); ++k) {
          if (token_text(i + k) != probe.tokens[k]) {
            matched = false;
            break;
          }
        }
        if (matched) {
          report.hits.push_back({dialog.id, turn, probe.key.domain, probe.key.slot_type,
                                 probe.value, where});
        }
      }
    }
  };

  for (const Dialog& dialog : corpus.dialogs) {
    for (const DialogTurn& turn : dialog.turns) {
      for (const SlotTriple& triple : turn.state) {
        if (!slot_in_scope(triple.key(), lexicon, config)) continue;
        std::string value = normalize_text(triple.value, config.norm);
        if (seen.contains(triple.key(), value)) {
          report.hits.push_back({dialog.id, turn.index, triple.domain, triple.slot_type, value,
                                 "state"});
        }
      }
      scan_text(dialog, turn.index, turn.user, "user");
      scan_text(dialog, turn.index, turn.system, "system");
    }
  }

  std::sort(report.hits.begin(), report.hits.end(),
            [](const LeakageReport::Hit& a, const LeakageReport::Hit& b) {
              return std::tie(a.dialog_id, a.turn, a.where, a.domain, a.slot_type, a.value) <
                     std::tie(b.dialog_id, b.turn, b.where, b.domain, b.slot_type, b.value);
            });
  report.hits.erase(std::unique(report.hits.begin(), report.hits.end()), report.hits.end());
  return report;
}

std::string render_leakage_report(const LeakageReport& report) {
  std::string out = "# values probed: " + std::to_string(report.values_checked) + "\n";
  out += "# hits: " + std::to_string(report.hits.size()) + "\n";
  out += "dialog_id\tturn\twhere\tdomain\tslot_type\tvalue\n";
  for (const LeakageReport::Hit& hit : report.hits) {
    out += hit.dialog_id + "\t" + std::to_string(hit.turn) + "\t" + hit.where + "\t" +
           hit.domain + "\t" + hit.slot_type + "\t" + detail::tsv_escape(hit.value) + "\n";
  }
  return out;
}

}  // namespace dstdoctor
