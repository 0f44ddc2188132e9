#include "dstdoctor/consistency.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <tuple>

#include "dstdoctor/parallel.hpp"
#include "text_util.hpp"

namespace dstdoctor {

std::string_view to_string(Side side) { return side == Side::user ? "user" : "system"; }

Side parse_side(std::string_view name) {
  if (name == "user") return Side::user;
  if (name == "system") return Side::system;
  throw ParseError("unknown side \"" + std::string(name) + "\"; expected user or system");
}

std::string_view to_string(CorrectionStatus status) {
  switch (status) {
    case CorrectionStatus::proposed: return "proposed";
    case CorrectionStatus::applied: return "applied";
    case CorrectionStatus::rejected: return "rejected";
  }
  return "proposed";
}

CorrectionStatus parse_correction_status(std::string_view name) {
  if (name == "proposed") return CorrectionStatus::proposed;
  if (name == "applied") return CorrectionStatus::applied;
  if (name == "rejected") return CorrectionStatus::rejected;
  throw ParseError("unknown correction status \"" + std::string(name) + "\"");
}

DetectionConfig DetectionConfig::defaults() {
  DetectionConfig config;
  config.slot_priority = {"name",   "destination", "departure", "food", "type",    "area",
                          "pricerange", "stars",   "parking",   "internet", "day", "time",
                          "leaveat", "arriveby",   "stay",      "people"};
  config.value_stoplist = {"dontcare", "no", "none", "yes"};
  config.min_value_chars = 2;
  return config;
}

namespace {

/// normalize + one synonym step: the comparison form used everywhere a raw
/// value meets a detected mention.
std::string canon_value(const SlotKey& key, std::string_view raw,
                        const NormalizationConfig& norm) {
  std::string value = normalize_text(raw, norm);
  if (const auto* table = norm.synonyms_for(key)) {
    auto it = table->find(value);
    if (it != table->end()) value = it->second;
  }
  return value;
}

std::vector<std::string> canon_values_at(const Dialog& dialog, int turn, const SlotKey& key,
                                         const NormalizationConfig& norm) {
  std::vector<std::string> out;
  for (const SlotTriple& t : dialog.turns[static_cast<std::size_t>(turn)].state) {
    if (t.domain == key.domain && t.slot_type == key.slot_type)
      out.push_back(canon_value(key, t.value, norm));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

struct MentionIndex::Impl {
  struct Entry {
    std::vector<std::string> tokens;
    std::string domain, slot_type, value;
  };

  DetectionConfig config;
  std::map<std::string, std::vector<Entry>, std::less<>> by_first_token;
  std::map<std::string, std::size_t> priority_rank;

  std::size_t rank(const std::string& slot_type) const {
    auto it = priority_rank.find(slot_type);
    return it == priority_rank.end() ? priority_rank.size() : it->second;
  }
};

MentionIndex::MentionIndex(const Ontology& ontology, const EntityDatabase& database,
                           const DetectionConfig& config)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = config;
  for (std::size_t i = 0; i < config.slot_priority.size(); ++i)
    impl_->priority_rank.emplace(config.slot_priority[i], i);

  // (domain, slot_type, variant text, canonical value)
  std::set<std::tuple<std::string, std::string, std::string, std::string>> vocabulary;
  auto admit = [&](const SlotKey& key, std::string variant) {
    if (variant.size() < config.min_value_chars) return;
    if (config.value_stoplist.count(variant) != 0) return;
    std::string canonical = variant;
    if (const auto* table = config.norm.synonyms_for(key)) {
      auto it = table->find(canonical);
      if (it != table->end()) canonical = it->second;
    }
    vocabulary.emplace(key.domain, key.slot_type, std::move(variant), std::move(canonical));
  };

  for (const auto& [key, entry] : ontology.entries) {
    for (const std::string& value : entry.values) admit(key, value);
  }
  for (const auto& [key, table] : config.norm.synonyms) {
    if (!ontology.has(key)) continue;
    for (const auto& [variant, target] : table) admit(key, variant);
  }
  for (const auto& [domain, records] : database.records) {
    for (const EntityRecord& record : records) {
      for (const auto& [slot_type, raw] : record) {
        SlotKey key{domain, slot_type};
        if (!ontology.has(key)) continue;
        admit(key, normalize_text(raw, config.norm));
      }
    }
  }

  for (const auto& [domain, slot_type, variant, canonical] : vocabulary) {
    Impl::Entry entry;
    for (std::string_view token : detail::split_ws(variant))
      entry.tokens.emplace_back(token);
    if (entry.tokens.empty()) continue;
    entry.domain = domain;
    entry.slot_type = slot_type;
    entry.value = canonical;
    impl_->by_first_token[entry.tokens.front()].push_back(std::move(entry));
  }
}

MentionIndex::~MentionIndex() = default;
MentionIndex::MentionIndex(MentionIndex&&) noexcept = default;
MentionIndex& MentionIndex::operator=(MentionIndex&&) noexcept = default;

const DetectionConfig& MentionIndex::config() const { return impl_->config; }

std::size_t MentionIndex::priority_rank(const std::string& slot_type) const {
  return impl_->rank(slot_type);
}

std::vector<MentionIndex::Match> MentionIndex::find_all(
    std::string_view raw, std::span<const std::string> active_domains) const {
  NormalizedText nt = normalize_with_map(raw, impl_->config.norm);
  std::vector<TokenSpan> tokens = tokenize(nt);
  auto token_text = [&](std::size_t i) {
    return std::string_view(nt.text).substr(tokens[i].begin, tokens[i].end - tokens[i].begin);
  };
  auto active = [&](const std::string& domain) {
    return std::find(active_domains.begin(), active_domains.end(), domain) !=
           active_domains.end();
  };

  std::vector<Match> matches;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = impl_->by_first_token.find(token_text(i));
    if (it == impl_->by_first_token.end()) continue;
    for (const Impl::Entry& entry : it->second) {
      if (!active(entry.domain)) continue;
      if (i + entry.tokens.size() > tokens.size()) continue;
      bool matched = true;
      for (std::size_t k = 1; k < entry.tokens.size(); ++k) {
        if (token_text(i + k) != entry.tokens[k]) {
          matched = false;
          break;
        }
      }
      if (!matched) continue;
      matches.push_back({entry.domain, entry.slot_type, entry.value, i, entry.tokens.size(),
                         tokens[i].raw_begin, tokens[i + entry.tokens.size() - 1].raw_end});
    }
  }
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    return std::tie(a.token_begin, a.token_count, a.domain, a.slot_type, a.value) <
           std::tie(b.token_begin, b.token_count, b.domain, b.slot_type, b.value);
  });
  return matches;
}

namespace {

std::vector<MentionIndex::Match> resolve_overlaps(std::vector<MentionIndex::Match> matches,
                                                  const MentionIndex& index) {
  // A span whose value belongs to several slots (station names under both
  // departure and destination, "free" under parking and internet) is not
  // evidence for any one of them; drop the whole group.
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::set<SlotKey>> span_slots;
  for (const MentionIndex::Match& m : matches)
    span_slots[{m.token_begin, m.token_count, m.value}].insert({m.domain, m.slot_type});
  std::erase_if(matches, [&](const MentionIndex::Match& m) {
    return span_slots[{m.token_begin, m.token_count, m.value}].size() > 1;
  });

  // Selection order: longest span, then slot priority, then leftmost, then a
  // lexicographic tie so equal candidates resolve the same way everywhere.
  std::sort(matches.begin(), matches.end(),
            [&](const MentionIndex::Match& a, const MentionIndex::Match& b) {
              if (a.token_count != b.token_count) return a.token_count > b.token_count;
              std::size_t la = a.end - a.begin, lb = b.end - b.begin;
              if (la != lb) return la > lb;
              std::size_t pa = index.priority_rank(a.slot_type);
              std::size_t pb = index.priority_rank(b.slot_type);
              if (pa != pb) return pa < pb;
              if (a.token_begin != b.token_begin) return a.token_begin < b.token_begin;
              return std::tie(a.domain, a.slot_type, a.value) <
                     std::tie(b.domain, b.slot_type, b.value);
            });

  std::vector<MentionIndex::Match> kept;
  for (const MentionIndex::Match& m : matches) {
    bool overlaps = false;
    for (const MentionIndex::Match& k : kept) {
      if (m.token_begin < k.token_begin + k.token_count &&
          k.token_begin < m.token_begin + m.token_count) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) kept.push_back(m);
  }
  std::sort(kept.begin(), kept.end(),
            [](const MentionIndex::Match& a, const MentionIndex::Match& b) {
              return std::tie(a.token_begin, a.domain, a.slot_type, a.value) <
                     std::tie(b.token_begin, b.domain, b.slot_type, b.value);
            });
  return kept;
}

}  // namespace

std::vector<MentionCandidate> detect_mentions(const Dialog& dialog, const MentionIndex& index) {
  std::vector<MentionCandidate> candidates;
  for (const DialogTurn& turn : dialog.turns) {
    for (Side side : {Side::user, Side::system}) {
      const std::string& text = side == Side::user ? turn.user : turn.system;
      for (const auto& m : resolve_overlaps(index.find_all(text, dialog.domains), index)) {
        candidates.push_back({dialog.id, turn.index, side, m.domain, m.slot_type, m.value,
                              m.begin, m.end});
      }
    }
  }
  return candidates;
}

std::vector<MentionCandidate> detect_mentions(const Dialog& dialog, const Ontology& ontology,
                                              const EntityDatabase& database,
                                              const DetectionConfig& config) {
  return detect_mentions(dialog, MentionIndex(ontology, database, config));
}

namespace {

std::string escape_regex(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '^': case '$': case '\\': case '.': case '*': case '+': case '?':
      case '(': case ')': case '[': case ']': case '{': case '}': case '|': case '/':
        out += '\\';
        [[fallthrough]];
      default:
        out += c;
    }
  }
  return out;
}

constexpr std::string_view kValuePlaceholder = "{value}";

std::size_t count_placeholders(std::string_view trigger) {
  std::size_t count = 0, pos = 0;
  while ((pos = trigger.find(kValuePlaceholder, pos)) != std::string_view::npos) {
    ++count;
    pos += kValuePlaceholder.size();
  }
  return count;
}

std::string instantiate_trigger(std::string_view trigger, std::string_view value) {
  std::string out;
  std::size_t pos = trigger.find(kValuePlaceholder);
  out.append(trigger.substr(0, pos));
  out.append(escape_regex(value));
  out.append(trigger.substr(pos + kValuePlaceholder.size()));
  return out;
}

bool is_rule_id(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

struct RuleSet::Impl {
  std::vector<CorrectionRule> rules;
  std::vector<std::vector<std::regex>> rejects;  // compiled, parallel to rules
  mutable std::mutex cache_mutex;
  mutable std::map<std::pair<std::size_t, std::string>, std::regex> trigger_cache;

  const std::regex* trigger_for(std::size_t rule, const std::string& value) const {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto [it, inserted] = trigger_cache.try_emplace({rule, value});
    if (inserted)
      it->second.assign(instantiate_trigger(rules[rule].trigger, value),
                        std::regex::ECMAScript | std::regex::optimize);
    // Map nodes are stable, so the pointer outlives the lock.
    return &it->second;
  }
};

RuleSet::RuleSet(std::vector<CorrectionRule> rules) : impl_(std::make_unique<Impl>()) {
  std::set<std::string> seen_ids;
  for (const CorrectionRule& rule : rules) {
    if (!is_rule_id(rule.rule_id))
      throw ValidationError("rule id \"" + rule.rule_id + "\" must match [a-z0-9_-]+");
    if (rule.rule_id == kUserMentionRule)
      throw ValidationError("rule id \"" + rule.rule_id + "\" is reserved");
    if (!seen_ids.insert(rule.rule_id).second)
      throw ValidationError("duplicate rule id \"" + rule.rule_id + "\"");
    if (rule.domain != "*" && !is_identifier(rule.domain))
      throw ValidationError("rule " + rule.rule_id + ": bad domain \"" + rule.domain + "\"");
    if (rule.slot_type != "*" && !is_identifier(rule.slot_type))
      throw ValidationError("rule " + rule.rule_id + ": bad slot type \"" + rule.slot_type + "\"");
    if (count_placeholders(rule.trigger) != 1)
      throw ValidationError("rule " + rule.rule_id +
                            ": trigger must contain {value} exactly once");
    std::vector<std::regex> compiled;
    try {
      (void)std::regex(instantiate_trigger(rule.trigger, "probe"),
                       std::regex::ECMAScript | std::regex::optimize);
      for (const std::string& pattern : rule.reject)
        compiled.emplace_back(pattern, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw ValidationError("rule " + rule.rule_id + ": bad pattern: " + e.what());
    }
    impl_->rejects.push_back(std::move(compiled));
  }
  impl_->rules = std::move(rules);
}

RuleSet::~RuleSet() = default;
RuleSet::RuleSet(RuleSet&&) noexcept = default;
RuleSet& RuleSet::operator=(RuleSet&&) noexcept = default;

std::span<const CorrectionRule> RuleSet::rules() const { return impl_->rules; }

const CorrectionRule* RuleSet::match(const SlotKey& key, std::string_view value,
                                     std::string_view system_text,
                                     std::string_view reply_text) const {
  std::string pair;
  pair.reserve(system_text.size() + reply_text.size() + 1);
  pair.append(system_text);
  pair.push_back('\n');
  pair.append(reply_text);
  std::string reply(reply_text);
  std::string value_str(value);

  for (std::size_t i = 0; i < impl_->rules.size(); ++i) {
    const CorrectionRule& rule = impl_->rules[i];
    if (rule.side != Side::system) continue;
    if (rule.domain != "*" && rule.domain != key.domain) continue;
    if (rule.slot_type != "*" && rule.slot_type != key.slot_type) continue;
    if (!std::regex_search(pair, *impl_->trigger_for(i, value_str))) continue;
    bool vetoed = false;
    for (const std::regex& reject : impl_->rejects[i]) {
      if (std::regex_search(reply, reject)) {
        vetoed = true;
        break;
      }
    }
    if (!vetoed) return &rule;
  }
  return nullptr;
}

RuleSet load_rules(const std::filesystem::path& path) {
  auto lines = detail::read_lines(path);
  auto context = [&](std::size_t i) {
    return path.filename().string() + ":" + std::to_string(i + 1);
  };

  std::vector<CorrectionRule> rules;
  std::optional<CorrectionRule> open;
  bool saw_slot = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = detail::trim(lines[i]);
    if (detail::is_skippable_line(line)) continue;
    if (line.starts_with("rule ")) {
      if (open) throw ParseError(context(i) + ": rule " + open->rule_id + " not closed with end");
      open = CorrectionRule{};
      open->rule_id = std::string(detail::trim(line.substr(5)));
      saw_slot = false;
      continue;
    }
    if (!open) throw ParseError(context(i) + ": expected a rule block");
    if (line.starts_with("slot ")) {
      if (saw_slot) throw ParseError(context(i) + ": duplicate slot line");
      std::string_view key_text = detail::trim(line.substr(5));
      std::size_t dot = key_text.find('.');
      if (dot == std::string_view::npos)
        throw ParseError(context(i) + ": slot needs domain.slot_type (with * wildcards)");
      open->domain = std::string(key_text.substr(0, dot));
      open->slot_type = std::string(key_text.substr(dot + 1));
      saw_slot = true;
      continue;
    }
    if (line.starts_with("side ")) {
      try {
        open->side = parse_side(detail::trim(line.substr(5)));
      } catch (const ParseError& e) {
        throw ParseError(context(i) + ": " + e.what());
      }
      continue;
    }
    if (line.starts_with("trigger ")) {
      if (!open->trigger.empty()) throw ParseError(context(i) + ": duplicate trigger line");
      open->trigger = std::string(detail::trim(line.substr(8)));
      continue;
    }
    if (line.starts_with("reject ")) {
      open->reject.emplace_back(detail::trim(line.substr(7)));
      continue;
    }
    if (line == "end") {
      if (!saw_slot) throw ParseError(context(i) + ": rule " + open->rule_id + " has no slot");
      if (open->trigger.empty())
        throw ParseError(context(i) + ": rule " + open->rule_id + " has no trigger");
      rules.push_back(std::move(*open));
      open.reset();
      continue;
    }
    throw ParseError(context(i) + ": unrecognized line \"" + std::string(line) + "\"");
  }
  if (open) throw ParseError(path.filename().string() + ": unterminated rule block");

  try {
    return RuleSet(std::move(rules));
  } catch (const ValidationError& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
}

namespace {

/// Proposals made earlier in a detection pass, projected forward so later
/// turns see them as if they were already applied. A proposal stays in
/// effect until a turn whose stored state assigns the slot a different
/// value.
class StateOverlay {
 public:
  void add(int turn, const SlotKey& key, const std::string& canonical_value) {
    proposals_[key].push_back({turn, canonical_value});
  }

  std::optional<std::string> effective(const Dialog& dialog, int turn, const SlotKey& key,
                                       const NormalizationConfig& norm) const {
    auto it = proposals_.find(key);
    if (it == proposals_.end()) return std::nullopt;
    const std::pair<int, std::string>* latest = nullptr;
    for (const auto& proposal : it->second) {
      if (proposal.first <= turn && (latest == nullptr || proposal.first > latest->first))
        latest = &proposal;
    }
    if (latest == nullptr) return std::nullopt;
    for (int u = latest->first + 1; u <= turn; ++u) {
      std::vector<std::string> held = canon_values_at(dialog, u, key, norm);
      if (!held.empty() &&
          std::find(held.begin(), held.end(), latest->second) == held.end())
        return std::nullopt;  // a stored assignment took over
    }
    return latest->second;
  }

 private:
  std::map<SlotKey, std::vector<std::pair<int, std::string>>> proposals_;
};

std::vector<CorrectionRecord> user_pass(const Dialog& dialog, const MentionIndex& index,
                                        StateOverlay& overlay) {
  const DetectionConfig& config = index.config();
  std::vector<CorrectionRecord> records;
  for (const DialogTurn& turn : dialog.turns) {
    for (const auto& m : resolve_overlaps(index.find_all(turn.user, dialog.domains), index)) {
      SlotKey key{m.domain, m.slot_type};
      std::vector<std::string> held = canon_values_at(dialog, turn.index, key, config.norm);
      if (!held.empty()) {
        bool same = std::find(held.begin(), held.end(), m.value) != held.end();
        if (same || !config.propose_overwrites) continue;
      } else if (auto pending = overlay.effective(dialog, turn.index, key, config.norm)) {
        continue;  // an earlier proposal covers this slot, same value or not
      }
      records.push_back({dialog.id, turn.index, SlotTriple{m.domain, m.slot_type, m.value},
                         Side::user, kUserMentionRule, CorrectionStatus::proposed});
      overlay.add(turn.index, key, m.value);
    }
  }
  return records;
}

std::vector<CorrectionRecord> system_pass(const Dialog& dialog, const RuleSet& rules,
                                          const MentionIndex& index, StateOverlay& overlay) {
  const DetectionConfig& config = index.config();
  std::vector<CorrectionRecord> records;
  for (std::size_t t = 0; t + 1 < dialog.turns.size(); ++t) {
    const DialogTurn& offer_turn = dialog.turns[t];
    const DialogTurn& uptake_turn = dialog.turns[t + 1];
    auto mentions = resolve_overlaps(index.find_all(offer_turn.system, dialog.domains), index);
    if (mentions.empty()) continue;
    std::string system_norm = normalize_text(offer_turn.system, config.norm);
    std::string reply_norm = normalize_text(uptake_turn.user, config.norm);
    for (const auto& m : mentions) {
      SlotKey key{m.domain, m.slot_type};
      if (!canon_values_at(dialog, uptake_turn.index, key, config.norm).empty()) continue;
      if (overlay.effective(dialog, uptake_turn.index, key, config.norm)) continue;
      const CorrectionRule* rule = rules.match(key, m.value, system_norm, reply_norm);
      if (rule == nullptr) continue;
      records.push_back({dialog.id, uptake_turn.index,
                         SlotTriple{m.domain, m.slot_type, m.value}, Side::system, rule->rule_id,
                         CorrectionStatus::proposed});
      overlay.add(uptake_turn.index, key, m.value);
    }
  }
  return records;
}

void sort_records(std::vector<CorrectionRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const CorrectionRecord& a, const CorrectionRecord& b) {
              return std::tie(a.dialog_id, a.turn, a.added, a.side, a.rule_id) <
                     std::tie(b.dialog_id, b.turn, b.added, b.side, b.rule_id);
            });
}

}  // namespace

std::vector<CorrectionRecord> detect_missing_user_annotations(const Dialog& dialog,
                                                              const MentionIndex& index) {
  StateOverlay overlay;
  auto records = user_pass(dialog, index, overlay);
  sort_records(records);
  return records;
}

std::vector<CorrectionRecord> detect_missing_system_annotations(const Dialog& dialog,
                                                                const RuleSet& rules,
                                                                const MentionIndex& index) {
  StateOverlay overlay;
  auto records = system_pass(dialog, rules, index, overlay);
  sort_records(records);
  return records;
}

std::vector<CorrectionRecord> detect_corrections(const Dialog& dialog, const RuleSet& rules,
                                                 const MentionIndex& index) {
  StateOverlay overlay;
  auto records = user_pass(dialog, index, overlay);
  auto system_records = system_pass(dialog, rules, index, overlay);
  records.insert(records.end(), std::make_move_iterator(system_records.begin()),
                 std::make_move_iterator(system_records.end()));
  sort_records(records);
  return records;
}

std::vector<CorrectionRecord> detect_corrections(const Corpus& corpus, const RuleSet& rules,
                                                 const MentionIndex& index, unsigned jobs) {
  std::vector<std::vector<CorrectionRecord>> per_dialog(corpus.dialogs.size());
  parallel_for(corpus.dialogs.size(), jobs, [&](std::size_t i) {
    per_dialog[i] = detect_corrections(corpus.dialogs[i], rules, index);
  });
  std::vector<CorrectionRecord> records;
  for (auto& part : per_dialog)
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  return records;
}

ApplyOutcome apply_corrections(const Corpus& corpus, std::vector<CorrectionRecord> records) {
  sort_records(records);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const CorrectionRecord& a = records[i - 1];
    const CorrectionRecord& b = records[i];
    if (a.dialog_id == b.dialog_id && a.turn == b.turn && a.added.key() == b.added.key() &&
        a.added.value != b.added.value) {
      throw ValidationError("conflicting corrections for dialog " + a.dialog_id + " turn " +
                            std::to_string(a.turn) + ": " + to_string(a.added) + " vs " +
                            to_string(b.added));
    }
  }

  ApplyOutcome outcome;
  outcome.corpus = corpus;
  NormalizationConfig norm;

  for (CorrectionRecord& record : records) {
    auto it = std::lower_bound(
        outcome.corpus.dialogs.begin(), outcome.corpus.dialogs.end(), record.dialog_id,
        [](const Dialog& d, const std::string& id) { return d.id < id; });
    if (it == outcome.corpus.dialogs.end() || it->id != record.dialog_id)
      throw ValidationError("correction for unknown dialog " + record.dialog_id);
    Dialog& dialog = *it;
    if (record.turn < 0 || record.turn >= static_cast<int>(dialog.turns.size()))
      throw ValidationError("correction for dialog " + record.dialog_id + " turn " +
                            std::to_string(record.turn) + " which does not exist");
    SlotKey key = record.added.key();
    if (!dialog.has_domain(key.domain))
      throw ValidationError("correction for dialog " + record.dialog_id + " adds domain " +
                            key.domain + " which the dialog does not cover");

    std::string added_norm = normalize_text(record.added.value, norm);
    std::vector<std::string> before = canon_values_at(dialog, record.turn, key, norm);
    if (std::find(before.begin(), before.end(), added_norm) != before.end()) {
      record.status = CorrectionStatus::rejected;
      continue;
    }

    // Rewrite the run of turns that still hold the pre-correction value(s);
    // the first turn that assigns something else ends the error's extent.
    for (int u = record.turn; u < static_cast<int>(dialog.turns.size()); ++u) {
      if (u > record.turn && canon_values_at(dialog, u, key, norm) != before) break;
      auto& state = dialog.turns[static_cast<std::size_t>(u)].state;
      state.erase(std::remove_if(state.begin(), state.end(),
                                 [&](const SlotTriple& t) {
                                   return t.domain == key.domain &&
                                          t.slot_type == key.slot_type;
                                 }),
                  state.end());
      state.push_back(record.added);
      std::sort(state.begin(), state.end());
    }
    record.status = CorrectionStatus::applied;
  }

  outcome.records = std::move(records);
  return outcome;
}

double CorrectionStats::Row::percent() const {
  if (domain_dialogs == 0) return 0.0;
  return 100.0 * static_cast<double>(modified_dialogs) / static_cast<double>(domain_dialogs);
}

double CorrectionStats::DomainTotal::percent() const {
  if (domain_dialogs == 0) return 0.0;
  return 100.0 * static_cast<double>(modified_dialogs) / static_cast<double>(domain_dialogs);
}

double CorrectionStats::SplitTotal::percent() const {
  if (total_dialogs == 0) return 0.0;
  return 100.0 * static_cast<double>(modified_dialogs) / static_cast<double>(total_dialogs);
}

CorrectionStats correction_stats(const Corpus& before, const Corpus& after,
                                 std::span<const CorrectionRecord> records) {
  if (before.dialogs.size() != after.dialogs.size())
    throw ValidationError("before and after corpora have different dialog counts");

  std::map<SlotKey, std::set<std::string>> modified_by_key;
  std::map<std::string, std::set<std::string>> modified_by_domain;
  std::set<std::string> modified_any;

  for (std::size_t d = 0; d < before.dialogs.size(); ++d) {
    const Dialog& b = before.dialogs[d];
    const Dialog& a = after.dialogs[d];
    if (a.id != b.id)
      throw ValidationError("before and after corpora list different dialogs at position " +
                            std::to_string(d));
    if (a.turns.size() != b.turns.size())
      throw ValidationError("dialog " + b.id + " changed turn count");
    for (std::size_t t = 0; t < b.turns.size(); ++t) {
      if (b.turns[t].state == a.turns[t].state) continue;
      std::set<SlotKey> keys;
      for (const SlotTriple& triple : b.turns[t].state) keys.insert(triple.key());
      for (const SlotTriple& triple : a.turns[t].state) keys.insert(triple.key());
      for (const SlotKey& key : keys) {
        std::vector<std::string> vb, va;
        for (const SlotTriple& triple : b.turns[t].state)
          if (triple.key() == key) vb.push_back(triple.value);
        for (const SlotTriple& triple : a.turns[t].state)
          if (triple.key() == key) va.push_back(triple.value);
        if (vb != va) {
          modified_by_key[key].insert(b.id);
          modified_by_domain[key.domain].insert(b.id);
          modified_any.insert(b.id);
        }
      }
    }
  }

  std::map<SlotKey, std::pair<std::uint64_t, std::uint64_t>> added_by_side;  // user, system
  for (const CorrectionRecord& record : records) {
    if (record.status != CorrectionStatus::applied) continue;
    auto& [user, system] = added_by_side[record.added.key()];
    (record.side == Side::user ? user : system) += 1;
  }

  std::map<std::string, std::uint64_t> domain_dialogs;
  for (const Dialog& dialog : after.dialogs) {
    for (const std::string& domain : dialog.domains) ++domain_dialogs[domain];
  }

  CorrectionStats stats;
  std::set<SlotKey> row_keys;
  for (const auto& [key, ids] : modified_by_key) row_keys.insert(key);
  for (const auto& [key, counts] : added_by_side) row_keys.insert(key);
  for (const SlotKey& key : row_keys) {
    CorrectionStats::Row row;
    row.split = after.split;
    row.domain = key.domain;
    row.slot_type = key.slot_type;
    if (auto it = modified_by_key.find(key); it != modified_by_key.end())
      row.modified_dialogs = it->second.size();
    row.domain_dialogs = domain_dialogs.count(key.domain) ? domain_dialogs[key.domain] : 0;
    if (auto it = added_by_side.find(key); it != added_by_side.end()) {
      row.user_added = it->second.first;
      row.system_added = it->second.second;
    }
    stats.rows.push_back(std::move(row));
  }
  for (const auto& [domain, ids] : modified_by_domain) {
    stats.domain_totals.push_back({after.split, domain, ids.size(),
                                   domain_dialogs.count(domain) ? domain_dialogs[domain] : 0});
  }
  stats.split_totals.push_back({after.split, modified_any.size(), after.dialogs.size()});
  return stats;
}

CorrectionStats merge_stats(std::span<const CorrectionStats> parts) {
  std::map<std::tuple<std::string, std::string, std::string>, CorrectionStats::Row> rows;
  std::map<std::pair<std::string, std::string>, CorrectionStats::DomainTotal> domains;
  std::map<std::string, CorrectionStats::SplitTotal> splits;

  for (const CorrectionStats& part : parts) {
    for (const CorrectionStats::Row& row : part.rows) {
      auto& sink = rows[{row.split, row.domain, row.slot_type}];
      sink.split = row.split;
      sink.domain = row.domain;
      sink.slot_type = row.slot_type;
      sink.modified_dialogs += row.modified_dialogs;
      sink.domain_dialogs += row.domain_dialogs;
      sink.user_added += row.user_added;
      sink.system_added += row.system_added;
    }
    for (const CorrectionStats::DomainTotal& total : part.domain_totals) {
      auto& sink = domains[{total.split, total.domain}];
      sink.split = total.split;
      sink.domain = total.domain;
      sink.modified_dialogs += total.modified_dialogs;
      sink.domain_dialogs += total.domain_dialogs;
    }
    for (const CorrectionStats::SplitTotal& total : part.split_totals) {
      auto& sink = splits[total.split];
      sink.split = total.split;
      sink.modified_dialogs += total.modified_dialogs;
      sink.total_dialogs += total.total_dialogs;
    }
  }

  CorrectionStats merged;
  for (auto& [key, row] : rows) merged.rows.push_back(std::move(row));
  for (auto& [key, total] : domains) merged.domain_totals.push_back(std::move(total));
  for (auto& [key, total] : splits) merged.split_totals.push_back(std::move(total));
  return merged;
}

namespace {

std::vector<std::string> present_splits(const CorrectionStats& stats) {
  std::set<std::string> seen;
  for (const auto& row : stats.rows) seen.insert(row.split);
  for (const auto& total : stats.split_totals) seen.insert(total.split);
  std::vector<std::string> ordered;
  for (const char* split : {"train", "valid", "test"}) {
    if (seen.count(split)) ordered.push_back(split);
  }
  return ordered;
}

std::string count_cell(std::uint64_t modified, double percent) {
  return std::to_string(modified) + " (" + detail::format_fixed(percent, 1) + "%)";
}

}  // namespace

std::string render_stats_table(const CorrectionStats& stats) {
  std::vector<std::string> splits = present_splits(stats);
  std::string out = "# modified dialogs per slot; percentages are of dialogs covering the domain\n";
  out += "domain\tslot_type";
  for (const std::string& split : splits) out += "\t" + split;
  out += "\n";

  std::set<SlotKey> keys;
  for (const auto& row : stats.rows) keys.insert({row.domain, row.slot_type});
  for (const SlotKey& key : keys) {
    out += key.domain + "\t" + key.slot_type;
    for (const std::string& split : splits) {
      const CorrectionStats::Row* found = nullptr;
      for (const auto& row : stats.rows) {
        if (row.split == split && row.domain == key.domain && row.slot_type == key.slot_type) {
          found = &row;
          break;
        }
      }
      out += "\t";
      out += found == nullptr ? "-" : count_cell(found->modified_dialogs, found->percent());
    }
    out += "\n";
  }

  out += "# modified dialogs per domain\n";
  out += "domain";
  for (const std::string& split : splits) out += "\t" + split;
  out += "\n";
  std::set<std::string> domain_names;
  for (const auto& total : stats.domain_totals) domain_names.insert(total.domain);
  for (const std::string& domain : domain_names) {
    out += domain;
    for (const std::string& split : splits) {
      const CorrectionStats::DomainTotal* found = nullptr;
      for (const auto& total : stats.domain_totals) {
        if (total.split == split && total.domain == domain) {
          found = &total;
          break;
        }
      }
      out += "\t";
      out += found == nullptr ? "-" : count_cell(found->modified_dialogs, found->percent());
    }
    out += "\n";
  }

  out += "# modified dialogs per split\n";
  out += "split\tmodified\ttotal\n";
  for (const std::string& split : splits) {
    for (const auto& total : stats.split_totals) {
      if (total.split != split) continue;
      out += total.split + "\t" + count_cell(total.modified_dialogs, total.percent()) + "\t" +
             std::to_string(total.total_dialogs) + "\n";
    }
  }
  return out;
}

std::string render_source_ratio_table(const CorrectionStats& stats) {
  std::string out = "# applied additions per slot by source side\n";
  out += "split\tdomain\tslot_type\tuser_added\tsystem_added\tuser_share\n";
  for (const CorrectionStats::Row& row : stats.rows) {
    std::uint64_t total = row.user_added + row.system_added;
    std::string share =
        total == 0
            ? "-"
            : detail::format_fixed(
                  100.0 * static_cast<double>(row.user_added) / static_cast<double>(total), 1) +
                  "%";
    out += row.split + "\t" + row.domain + "\t" + row.slot_type + "\t" +
           std::to_string(row.user_added) + "\t" + std::to_string(row.system_added) + "\t" +
           share + "\n";
  }
  return out;
}

void write_stats(const CorrectionStats& stats, const std::filesystem::path& path) {
  std::string out = "# correction stats v1\n";
  out += "kind\tsplit\tdomain\tslot_type\tmodified\tdenominator\tuser_added\tsystem_added\n";
  for (const CorrectionStats::Row& row : stats.rows) {
    out += "row\t" + row.split + "\t" + row.domain + "\t" + row.slot_type + "\t" +
           std::to_string(row.modified_dialogs) + "\t" + std::to_string(row.domain_dialogs) +
           "\t" + std::to_string(row.user_added) + "\t" + std::to_string(row.system_added) + "\n";
  }
  for (const CorrectionStats::DomainTotal& total : stats.domain_totals) {
    out += "domain\t" + total.split + "\t" + total.domain + "\t-\t" +
           std::to_string(total.modified_dialogs) + "\t" + std::to_string(total.domain_dialogs) +
           "\t0\t0\n";
  }
  for (const CorrectionStats::SplitTotal& total : stats.split_totals) {
    out += "split\t" + total.split + "\t-\t-\t" + std::to_string(total.modified_dialogs) + "\t" +
           std::to_string(total.total_dialogs) + "\t0\t0\n";
  }
  detail::write_file_atomic(path, out);
}

CorrectionStats read_stats(const std::filesystem::path& path) {
  CorrectionStats stats;
  bool saw_header = false;
  auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (detail::is_skippable_line(line)) continue;
    if (!saw_header) {
      if (!line.starts_with("kind\t"))
        throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                         ": expected the stats header");
      saw_header = true;
      continue;
    }
    auto cells = detail::split(line, '\t');
    if (cells.size() != 8)
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": expected 8 columns");
    std::string kind(cells[0]);
    if (kind == "row") {
      CorrectionStats::Row row;
      row.split = std::string(cells[1]);
      row.domain = std::string(cells[2]);
      row.slot_type = std::string(cells[3]);
      row.modified_dialogs = detail::parse_uint(cells[4], "modified");
      row.domain_dialogs = detail::parse_uint(cells[5], "denominator");
      row.user_added = detail::parse_uint(cells[6], "user_added");
      row.system_added = detail::parse_uint(cells[7], "system_added");
      stats.rows.push_back(std::move(row));
    } else if (kind == "domain") {
      stats.domain_totals.push_back({std::string(cells[1]), std::string(cells[2]),
                                     detail::parse_uint(cells[4], "modified"),
                                     detail::parse_uint(cells[5], "denominator")});
    } else if (kind == "split") {
      stats.split_totals.push_back({std::string(cells[1]),
                                    detail::parse_uint(cells[4], "modified"),
                                    detail::parse_uint(cells[5], "denominator")});
    } else {
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": unknown row kind \"" + kind + "\"");
    }
  }
  if (!saw_header) throw ParseError(path.filename().string() + ": missing stats header");
  return stats;
}

void write_records(std::span<const CorrectionRecord> records,
                   const std::filesystem::path& path) {
  std::string out = "dialog_id\tturn\tdomain\tslot_type\tvalue\tside\trule_id\tstatus\n";
  for (const CorrectionRecord& record : records) {
    out += record.dialog_id + "\t" + std::to_string(record.turn) + "\t" + record.added.domain +
           "\t" + record.added.slot_type + "\t" + detail::tsv_escape(record.added.value) + "\t" +
           std::string(to_string(record.side)) + "\t" + record.rule_id + "\t" +
           std::string(to_string(record.status)) + "\n";
  }
  detail::write_file_atomic(path, out);
}

std::vector<CorrectionRecord> read_records(const std::filesystem::path& path) {
  std::vector<CorrectionRecord> records;
  bool saw_header = false;
  auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (detail::is_skippable_line(line)) continue;
    if (!saw_header) {
      if (!line.starts_with("dialog_id\t"))
        throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                         ": expected the record header");
      saw_header = true;
      continue;
    }
    auto cells = detail::split(line, '\t');
    if (cells.size() != 8)
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": expected 8 columns");
    CorrectionRecord record;
    record.dialog_id = std::string(cells[0]);
    record.turn = static_cast<int>(detail::parse_uint(cells[1], "turn"));
    record.added.domain = std::string(cells[2]);
    record.added.slot_type = std::string(cells[3]);
    record.added.value = detail::tsv_unescape(cells[4]);
    record.side = parse_side(cells[5]);
    record.rule_id = std::string(cells[6]);
    record.status = parse_correction_status(cells[7]);
    records.push_back(std::move(record));
  }
  if (!saw_header) throw ParseError(path.filename().string() + ": missing record header");
  return records;
}

namespace {

std::string state_diff(const Dialog& before, const Dialog& after) {
  std::vector<std::string> parts;
  for (std::size_t t = 0; t < before.turns.size(); ++t) {
    const auto& sb = before.turns[t].state;
    const auto& sa = after.turns[t].state;
    if (sb == sa) continue;
    std::string part = "turn " + std::to_string(before.turns[t].index) + ":";
    for (const SlotTriple& triple : sb) {
      if (std::find(sa.begin(), sa.end(), triple) == sa.end()) part += " -" + to_string(triple);
    }
    for (const SlotTriple& triple : sa) {
      if (std::find(sb.begin(), sb.end(), triple) == sb.end()) part += " +" + to_string(triple);
    }
    parts.push_back(std::move(part));
  }
  return detail::join(parts, " | ");
}

}  // namespace

std::vector<WorksheetRow> sample_verification(const Corpus& before, const Corpus& after,
                                              std::size_t n_modified, std::size_t n_unchanged,
                                              std::uint64_t seed) {
  if (before.dialogs.size() != after.dialogs.size())
    throw ValidationError("before and after corpora have different dialog counts");

  std::vector<std::string> modified, unchanged;
  for (std::size_t d = 0; d < before.dialogs.size(); ++d) {
    const Dialog& b = before.dialogs[d];
    const Dialog& a = after.dialogs[d];
    if (a.id != b.id)
      throw ValidationError("before and after corpora list different dialogs at position " +
                            std::to_string(d));
    if (a.turns.size() != b.turns.size())
      throw ValidationError("dialog " + b.id + " changed turn count");
    bool differs = false;
    for (std::size_t t = 0; t < b.turns.size(); ++t) {
      if (b.turns[t].state != a.turns[t].state) {
        differs = true;
        break;
      }
    }
    (differs ? modified : unchanged).push_back(b.id);
  }

  std::mt19937_64 rng(seed);
  detail::shuffle_portable(modified, rng);
  if (modified.size() > n_modified) modified.resize(n_modified);
  detail::shuffle_portable(unchanged, rng);
  if (unchanged.size() > n_unchanged) unchanged.resize(n_unchanged);
  std::sort(modified.begin(), modified.end());
  std::sort(unchanged.begin(), unchanged.end());

  std::vector<WorksheetRow> rows;
  for (const std::string& id : modified) {
    rows.push_back({"", "modified", id, state_diff(*before.find(id), *after.find(id))});
  }
  for (const std::string& id : unchanged) {
    rows.push_back({"", "unchanged", id, ""});
  }
  return rows;
}

void write_worksheet(std::span<const WorksheetRow> rows, const std::filesystem::path& path) {
  std::string out = "label\tstratum\tdialog_id\tdiff\n";
  for (const WorksheetRow& row : rows) {
    out += detail::tsv_escape(row.label) + "\t" + row.stratum + "\t" + row.dialog_id + "\t" +
           detail::tsv_escape(row.diff) + "\n";
  }
  detail::write_file_atomic(path, out);
}

std::vector<WorksheetRow> read_worksheet(const std::filesystem::path& path) {
  std::vector<WorksheetRow> rows;
  bool saw_header = false;
  auto lines = detail::read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (detail::is_skippable_line(line)) continue;
    if (!saw_header) {
      if (!line.starts_with("label\t"))
        throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                         ": expected the worksheet header");
      saw_header = true;
      continue;
    }
    auto cells = detail::split(line, '\t');
    if (cells.size() != 4)
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": expected 4 columns");
    rows.push_back({detail::tsv_unescape(cells[0]), std::string(cells[1]), std::string(cells[2]),
                    detail::tsv_unescape(cells[3])});
  }
  if (!saw_header) throw ParseError(path.filename().string() + ": missing worksheet header");
  return rows;
}

VerificationCounts worksheet_counts(std::span<const WorksheetRow> rows) {
  VerificationCounts counts;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const WorksheetRow& row = rows[i];
    bool modified;
    if (row.stratum == "modified") modified = true;
    else if (row.stratum == "unchanged") modified = false;
    else
      throw ValidationError("worksheet row " + std::to_string(i + 1) + " (dialog " +
                            row.dialog_id + "): unknown stratum \"" + row.stratum + "\"");
    std::string label(detail::trim(row.label));
    bool correct;
    if (label == "correct") correct = true;
    else if (label == "incorrect") correct = false;
    else
      throw ValidationError("worksheet row " + std::to_string(i + 1) + " (dialog " +
                            row.dialog_id + "): label must be correct or incorrect, got \"" +
                            label + "\"");
    if (modified) (correct ? counts.tp : counts.fp) += 1;
    else (correct ? counts.tn : counts.fn) += 1;
  }
  return counts;
}

VerificationMetrics verification_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                         std::uint64_t tn) {
  (void)tn;  // not part of precision, recall, or F1; kept for the report
  VerificationMetrics metrics;
  if (tp + fp > 0) {
    metrics.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  } else {
    metrics.warnings.push_back("no positive decisions; precision reported as 0");
  }
  if (tp + fn > 0) {
    metrics.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  } else {
    metrics.warnings.push_back("no positive cases; recall reported as 0");
  }
  if (metrics.precision + metrics.recall > 0) {
    metrics.f1 = 2.0 * metrics.precision * metrics.recall /
                 (metrics.precision + metrics.recall);
  } else {
    metrics.warnings.push_back("precision and recall are both 0; F1 reported as 0");
  }
  return metrics;
}

std::string render_verification_report(const VerificationCounts& counts,
                                       const VerificationMetrics& metrics) {
  std::string out;
  out += "tp\t" + std::to_string(counts.tp) + "\n";
  out += "fp\t" + std::to_string(counts.fp) + "\n";
  out += "fn\t" + std::to_string(counts.fn) + "\n";
  out += "tn\t" + std::to_string(counts.tn) + "\n";
  out += "precision\t" + detail::format_fixed(metrics.precision, 4) + "\n";
  out += "recall\t" + detail::format_fixed(metrics.recall, 4) + "\n";
  out += "f1\t" + detail::format_fixed(metrics.f1, 4) + "\n";
  for (const std::string& warning : metrics.warnings) out += "# " + warning + "\n";
  return out;
}

}  // namespace dstdoctor
