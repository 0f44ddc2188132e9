#include "dstdoctor/corpus_io.hpp"

#include <algorithm>
#include <json.hpp>
#include <set>

#include "text_util.hpp"

namespace dstdoctor {
namespace {

using detail::is_skippable_line;
using detail::trim;

const std::set<std::string, std::less<>> kSplits = {"test", "train", "valid"};

/// Dialog text and values travel through tab-separated reports and
/// line-oriented files; tabs and control bytes would corrupt both.
void check_text_field(std::string_view text, const std::string& context) {
  for (unsigned char c : text) {
    if (c == '\t') throw ParseError(context + ": text field contains a tab");
    if (c < 0x20) throw ParseError(context + ": text field contains a control character");
  }
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

bool is_plain_token(std::string_view s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (c <= 0x20 || c >= 0x7F) return false;
  }
  return true;
}

class NativeCorpusParser {
 public:
  NativeCorpusParser(const std::filesystem::path& path, const LoadOptions& options)
      : path_(path), options_(options), lines_(detail::read_lines(path)) {}

  Corpus run() {
    corpus_.split = options_.default_split;
    for (line_ = 0; line_ < lines_.size(); ++line_) {
      std::string_view raw = lines_[line_];
      if (is_skippable_line(raw)) continue;
      std::string_view line = trim(raw);
      dispatch(line);
    }
    if (in_dialog_) fail("dialog " + dialog_.id + " not closed with end");
    return std::move(corpus_);
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(path_.filename().string() + ":" + std::to_string(line_ + 1) + ": " + message);
  }

  static std::string_view payload(std::string_view line, std::size_t keyword_len) {
    if (line.size() == keyword_len) return {};
    return line.substr(keyword_len + 1);
  }

  void dispatch(std::string_view line) {
    if (line.starts_with("corpus")) return on_corpus(payload(line, 6));
    if (line.starts_with("dialog ")) return on_dialog(payload(line, 6));
    if (line.starts_with("domains")) return on_domains(payload(line, 7));
    if (line.starts_with("turn ")) return on_turn(payload(line, 4));
    if (line == "user" || line.starts_with("user ")) return on_user(payload(line, 4));
    if (line == "system" || line.starts_with("system ")) return on_system(payload(line, 6));
    if (line.starts_with("state ")) return on_state(payload(line, 5));
    if (line == "end") return on_end();
    fail("unrecognized line \"" + std::string(line) + "\"");
  }

  void on_corpus(std::string_view rest) {
    if (saw_header_ || !corpus_.dialogs.empty() || in_dialog_) fail("corpus header must come first");
    std::string split(trim(rest));
    if (kSplits.count(split) == 0) fail("split must be train, valid, or test; got \"" + split + "\"");
    corpus_.split = split;
    saw_header_ = true;
  }

  void on_dialog(std::string_view rest) {
    if (in_dialog_) fail("dialog " + dialog_.id + " not closed with end");
    std::string id(trim(rest));
    if (!is_plain_token(id)) fail("dialog id must be one printable token");
    dialog_ = Dialog{};
    dialog_.id = id;
    in_dialog_ = true;
    saw_domains_ = false;
    turn_open_ = false;
  }

  void on_domains(std::string_view rest) {
    if (!in_dialog_ || saw_domains_ || turn_open_) fail("domains must follow the dialog line");
    for (std::string_view token : detail::split_ws(rest)) {
      std::string domain(token);
      if (!is_identifier(domain)) fail("domain must match [a-z0-9_]+, got \"" + domain + "\"");
      if (std::find(dialog_.domains.begin(), dialog_.domains.end(), domain) !=
          dialog_.domains.end())
        fail("duplicate domain \"" + domain + "\"");
      dialog_.domains.push_back(std::move(domain));
    }
    if (dialog_.domains.empty()) fail("a dialog needs at least one domain");
    std::sort(dialog_.domains.begin(), dialog_.domains.end());
    saw_domains_ = true;
  }

  void on_turn(std::string_view rest) {
    if (!in_dialog_ || !saw_domains_) fail("turn outside a dialog");
    close_turn();
    int expected = static_cast<int>(dialog_.turns.size());
    std::uint64_t index = detail::parse_uint(trim(rest), "turn index");
    if (index != static_cast<std::uint64_t>(expected))
      fail("turn indices must be consecutive from 0; expected " + std::to_string(expected));
    turn_ = DialogTurn{};
    turn_.index = expected;
    turn_open_ = true;
    saw_user_ = saw_system_ = false;
  }

  void on_user(std::string_view rest) {
    if (!turn_open_ || saw_user_) fail("each turn needs exactly one user line, first");
    check_text_field(rest, location());
    turn_.user = std::string(rest);
    saw_user_ = true;
  }

  void on_system(std::string_view rest) {
    if (!turn_open_ || !saw_user_ || saw_system_) fail("system must follow the turn's user line");
    check_text_field(rest, location());
    turn_.system = std::string(rest);
    saw_system_ = true;
  }

  void on_state(std::string_view rest) {
    if (!turn_open_ || !saw_system_) fail("state lines belong after user and system");
    SlotTriple triple;
    try {
      triple = parse_slot_triple(rest);
    } catch (const ParseError& e) {
      fail(e.what());
    }
    check_text_field(triple.value, location());
    if (!dialog_.has_domain(triple.domain))
      fail("state domain \"" + triple.domain + "\" is not in this dialog's domains");
    for (const SlotTriple& prev : turn_.state) {
      if (prev == triple) fail("duplicate state entry " + to_string(triple));
      if (!options_.multi_value && prev.key() == triple.key())
        fail("slot " + to_string(triple.key()) + " already has a value in this turn");
    }
    turn_.state.push_back(std::move(triple));
  }

  void on_end() {
    if (!in_dialog_) fail("end without dialog");
    close_turn();
    if (dialog_.turns.empty()) fail("dialog " + dialog_.id + " has no turns");
    // Only the final turn may lack a system response.
    for (std::size_t t = 0; t + 1 < dialog_.turns.size(); ++t) {
      if (dialog_.turns[t].system.empty())
        fail("dialog " + dialog_.id + " turn " + std::to_string(t) +
             ": empty system response before the final turn");
    }
    corpus_.dialogs.push_back(std::move(dialog_));
    in_dialog_ = false;
  }

  void close_turn() {
    if (!turn_open_) return;
    if (!saw_user_ || !saw_system_) fail("turn " + std::to_string(turn_.index) + " is missing user or system");
    std::sort(turn_.state.begin(), turn_.state.end());
    dialog_.turns.push_back(std::move(turn_));
    turn_open_ = false;
  }

  std::string location() const {
    return path_.filename().string() + ":" + std::to_string(line_ + 1);
  }

  const std::filesystem::path& path_;
  const LoadOptions& options_;
  std::vector<std::string> lines_;
  std::size_t line_ = 0;

  Corpus corpus_;
  Dialog dialog_;
  DialogTurn turn_;
  bool saw_header_ = false;
  bool in_dialog_ = false;
  bool saw_domains_ = false;
  bool turn_open_ = false;
  bool saw_user_ = false;
  bool saw_system_ = false;
};

/// "hotel-book stay" -> ("hotel", "bookstay"): domain is the dash prefix,
/// the remainder keeps only identifier characters.
std::pair<std::string, std::string> split_foreign_slot_name(const std::string& name) {
  std::size_t dash = name.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == name.size())
    throw ParseError("slot name \"" + name + "\" is not domain-slot shaped");
  std::string domain = ascii_lower(name.substr(0, dash));
  std::string slot;
  for (char c : ascii_lower(name.substr(dash + 1))) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_') slot += c;
  }
  if (!is_identifier(domain) || !is_identifier(slot))
    throw ParseError("slot name \"" + name + "\" does not reduce to identifiers");
  return {std::move(domain), std::move(slot)};
}

Corpus load_foreign_corpus(const std::filesystem::path& path, const LoadOptions& options,
                           Diagnostics* diags) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(path.filename().string() + ": expected a top-level array");

  Corpus corpus;
  corpus.split = options.default_split;
  try {
    for (const auto& item : doc) {
      Dialog dialog;
      dialog.id = item.at("dialogue_id").get<std::string>();
      if (!is_plain_token(dialog.id))
        throw ParseError("dialogue_id \"" + dialog.id + "\" is not one printable token");

      std::set<std::string> domains;
      for (const auto& service : item.value("services", nlohmann::json::array()))
        domains.insert(ascii_lower(service.get<std::string>()));

      const auto& turns = item.at("turns");
      for (std::size_t p = 0; p < turns.size();) {
        const auto& turn = turns[p];
        std::string speaker = turn.at("speaker").get<std::string>();
        if (speaker != "USER")
          throw ParseError("dialog " + dialog.id + ": expected USER at position " +
                           std::to_string(p) + ", got " + speaker);
        DialogTurn dt;
        dt.index = static_cast<int>(dialog.turns.size());
        dt.user = turn.at("utterance").get<std::string>();
        check_text_field(dt.user, "dialog " + dialog.id);

        for (const auto& frame : turn.value("frames", nlohmann::json::array())) {
          const auto state = frame.value("state", nlohmann::json::object());
          // items() keeps a reference, so the json it iterates must be named.
          const auto slot_values = state.value("slot_values", nlohmann::json::object());
          for (const auto& [name, values] : slot_values.items()) {
            auto [domain, slot_type] = split_foreign_slot_name(name);
            domains.insert(domain);
            if (!values.is_array() || values.empty())
              throw ParseError("dialog " + dialog.id + ": slot " + name + " has no values");
            std::size_t take = options.multi_value ? values.size() : 1;
            if (!options.multi_value && values.size() > 1) {
              append(diags, {Severity::warning,
                             "dialog " + dialog.id + " turn " + std::to_string(dt.index),
                             "slot " + name + " lists " + std::to_string(values.size()) +
                                 " alternatives; keeping the first"});
            }
            for (std::size_t v = 0; v < take; ++v) {
              SlotTriple triple{domain, slot_type, values[v].get<std::string>()};
              check_text_field(triple.value, "dialog " + dialog.id);
              if (std::find(dt.state.begin(), dt.state.end(), triple) == dt.state.end())
                dt.state.push_back(std::move(triple));
            }
          }
        }
        std::sort(dt.state.begin(), dt.state.end());

        if (p + 1 < turns.size()) {
          const auto& reply = turns[p + 1];
          if (reply.at("speaker").get<std::string>() != "SYSTEM")
            throw ParseError("dialog " + dialog.id + ": two USER turns in a row");
          dt.system = reply.at("utterance").get<std::string>();
          check_text_field(dt.system, "dialog " + dialog.id);
          p += 2;
        } else {
          p += 1;
        }
        dialog.turns.push_back(std::move(dt));
      }
      if (dialog.turns.empty())
        throw ParseError("dialog " + dialog.id + " has no turns");

      dialog.domains.assign(domains.begin(), domains.end());
      if (dialog.domains.empty())
        throw ParseError("dialog " + dialog.id + " has no services and no state");
      corpus.dialogs.push_back(std::move(dialog));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
  return corpus;
}

void check_unique_sorted_ids(Corpus& corpus, const std::filesystem::path& path) {
  std::sort(corpus.dialogs.begin(), corpus.dialogs.end(),
            [](const Dialog& a, const Dialog& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < corpus.dialogs.size(); ++i) {
    if (corpus.dialogs[i].id == corpus.dialogs[i - 1].id)
      throw ParseError(path.filename().string() + ": duplicate dialog id " + corpus.dialogs[i].id);
  }
}

}  // namespace

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "native") return CorpusFormat::native;
  if (name == "multiwoz22") return CorpusFormat::multiwoz22;
  throw ParseError("unknown corpus format \"" + std::string(name) +
                   "\"; expected native or multiwoz22");
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options,
                   Diagnostics* diags) {
  if (kSplits.count(options.default_split) == 0)
    throw ValidationError("default split must be train, valid, or test");
  Corpus corpus = options.format == CorpusFormat::native
                      ? NativeCorpusParser(path, options).run()
                      : load_foreign_corpus(path, options, diags);
  check_unique_sorted_ids(corpus, path);
  return corpus;
}

std::string render_corpus(const Corpus& corpus) {
  std::string out = "corpus " + corpus.split + "\n";
  for (const Dialog& dialog : corpus.dialogs) {
    out += "\ndialog " + dialog.id + "\n";
    out += "domains";
    for (const std::string& d : dialog.domains) {
      out += ' ';
      out += d;
    }
    out += '\n';
    for (const DialogTurn& turn : dialog.turns) {
      out += "turn " + std::to_string(turn.index) + "\n";
      out += turn.user.empty() ? "user" : "user " + turn.user;
      out += '\n';
      out += turn.system.empty() ? "system" : "system " + turn.system;
      out += '\n';
      for (const SlotTriple& triple : turn.state) out += "state " + to_string(triple) + "\n";
    }
    out += "end\n";
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  detail::write_file_atomic(path, render_corpus(corpus));
}

namespace {

Ontology load_native_ontology(const std::filesystem::path& path,
                              const NormalizationConfig& norm) {
  Ontology ontology;
  auto lines = detail::read_lines(path);
  std::optional<SlotKey> open;
  OntologyEntry entry;
  bool saw_categorical = false;
  auto context = [&](std::size_t i) {
    return path.filename().string() + ":" + std::to_string(i + 1);
  };

  auto close = [&](std::size_t i) {
    std::sort(entry.values.begin(), entry.values.end());
    entry.values.erase(std::unique(entry.values.begin(), entry.values.end()), entry.values.end());
    if (entry.categorical && entry.values.empty())
      throw ParseError(context(i) + ": categorical slot " + to_string(*open) + " lists no values");
    if (entry.categorical && entry.values.size() > ontology.categorical_cap)
      throw ValidationError(context(i) + ": categorical slot " + to_string(*open) + " has " +
                            std::to_string(entry.values.size()) + " values, cap is " +
                            std::to_string(ontology.categorical_cap));
    ontology.entries.emplace(*open, std::move(entry));
    open.reset();
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (is_skippable_line(line)) continue;
    if (line.starts_with("slot ")) {
      if (open) throw ParseError(context(i) + ": slot block not closed with end");
      SlotKey key;
      try {
        key = parse_slot_key(trim(line.substr(5)));
      } catch (const ParseError& e) {
        throw ParseError(context(i) + ": " + e.what());
      }
      if (ontology.entries.count(key) != 0)
        throw ParseError(context(i) + ": duplicate slot " + to_string(key));
      open = key;
      entry = OntologyEntry{};
      saw_categorical = false;
      continue;
    }
    if (line.starts_with("categorical ")) {
      if (!open || saw_categorical) throw ParseError(context(i) + ": stray categorical line");
      std::string_view v = trim(line.substr(12));
      if (v == "true") entry.categorical = true;
      else if (v == "false") entry.categorical = false;
      else throw ParseError(context(i) + ": categorical must be true or false");
      saw_categorical = true;
      continue;
    }
    if (line.starts_with("value ")) {
      if (!open) throw ParseError(context(i) + ": value outside a slot block");
      std::string value = normalize_text(trim(line.substr(6)), norm);
      if (value.empty()) throw ParseError(context(i) + ": value normalizes to nothing");
      entry.values.push_back(std::move(value));
      continue;
    }
    if (line == "end") {
      if (!open) throw ParseError(context(i) + ": end without slot");
      close(i);
      continue;
    }
    throw ParseError(context(i) + ": unrecognized line \"" + std::string(line) + "\"");
  }
  if (open) throw ParseError(path.filename().string() + ": unterminated slot block");
  return ontology;
}

Ontology load_foreign_ontology(const std::filesystem::path& path,
                               const NormalizationConfig& norm) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(path.filename().string() + ": expected a top-level array");

  Ontology ontology;
  try {
    for (const auto& service : doc) {
      for (const auto& slot : service.value("slots", nlohmann::json::array())) {
        auto [domain, slot_type] =
            split_foreign_slot_name(slot.at("name").get<std::string>());
        SlotKey key{domain, slot_type};
        if (ontology.entries.count(key) != 0)
          throw ParseError(path.filename().string() + ": duplicate slot " + to_string(key));
        OntologyEntry entry;
        entry.categorical = slot.value("is_categorical", false);
        for (const auto& value : slot.value("possible_values", nlohmann::json::array())) {
          std::string v = normalize_text(value.get<std::string>(), norm);
          if (!v.empty()) entry.values.push_back(std::move(v));
        }
        std::sort(entry.values.begin(), entry.values.end());
        entry.values.erase(std::unique(entry.values.begin(), entry.values.end()),
                           entry.values.end());
        if (entry.categorical && entry.values.size() > ontology.categorical_cap)
          throw ValidationError(path.filename().string() + ": categorical slot " +
                                to_string(key) + " has " + std::to_string(entry.values.size()) +
                                " values, cap is " + std::to_string(ontology.categorical_cap));
        ontology.entries.emplace(key, std::move(entry));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
  return ontology;
}

}  // namespace

Ontology load_ontology(const std::filesystem::path& path, CorpusFormat format,
                       const NormalizationConfig& norm) {
  return format == CorpusFormat::native ? load_native_ontology(path, norm)
                                        : load_foreign_ontology(path, norm);
}

EntityDatabase load_database(const std::filesystem::path& path) {
  EntityDatabase db;
  auto lines = detail::read_lines(path);
  auto context = [&](std::size_t i) {
    return path.filename().string() + ":" + std::to_string(i + 1);
  };

  std::optional<std::string> domain;
  EntityRecord record;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (is_skippable_line(line)) continue;
    if (line.starts_with("entity ")) {
      if (domain) throw ParseError(context(i) + ": entity block not closed with end");
      std::string d(trim(line.substr(7)));
      if (!is_identifier(d)) throw ParseError(context(i) + ": domain must match [a-z0-9_]+");
      domain = d;
      record.clear();
      continue;
    }
    if (line.starts_with("field ")) {
      if (!domain) throw ParseError(context(i) + ": field outside an entity block");
      std::string_view rest = trim(line.substr(6));
      std::size_t space = rest.find(' ');
      if (space == std::string_view::npos)
        throw ParseError(context(i) + ": field needs a slot type and a value");
      std::string slot_type(rest.substr(0, space));
      std::string value(trim(rest.substr(space + 1)));
      if (!is_identifier(slot_type))
        throw ParseError(context(i) + ": slot type must match [a-z0-9_]+");
      if (value.empty()) throw ParseError(context(i) + ": empty field value");
      check_text_field(value, context(i));
      if (record.count(slot_type) != 0)
        throw ParseError(context(i) + ": duplicate field " + slot_type);
      record.emplace(std::move(slot_type), std::move(value));
      continue;
    }
    if (line == "end") {
      if (!domain) throw ParseError(context(i) + ": end without entity");
      if (record.empty()) throw ParseError(context(i) + ": entity has no fields");
      db.records[*domain].push_back(std::move(record));
      record.clear();
      domain.reset();
      continue;
    }
    throw ParseError(context(i) + ": unrecognized line \"" + std::string(line) + "\"");
  }
  if (domain) throw ParseError(path.filename().string() + ": unterminated entity block");
  return db;
}

PredictionSet load_predictions(const std::filesystem::path& path, const Corpus& gold,
                               const Ontology* ontology, const LoadOptions& options) {
  PredictionSet predictions;
  auto lines = detail::read_lines(path);
  auto context = [&](std::size_t i) {
    return path.filename().string() + ":" + std::to_string(i + 1);
  };

  std::optional<TurnRef> open;
  std::vector<SlotTriple> state;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i]);
    if (is_skippable_line(line)) continue;
    if (line.starts_with("prediction ")) {
      if (open) throw ParseError(context(i) + ": prediction block not closed with end");
      auto parts = detail::split_ws(line.substr(11));
      if (parts.size() != 2)
        throw ParseError(context(i) + ": prediction needs a dialog id and a turn index");
      TurnRef ref{std::string(parts[0]),
                  static_cast<int>(detail::parse_uint(parts[1], "turn index"))};
      const Dialog* dialog = gold.find(ref.dialog_id);
      if (dialog == nullptr)
        throw ValidationError(context(i) + ": prediction for unknown dialog " + ref.dialog_id);
      if (ref.turn < 0 || ref.turn >= static_cast<int>(dialog->turns.size()))
        throw ValidationError(context(i) + ": dialog " + ref.dialog_id + " has no turn " +
                              std::to_string(ref.turn));
      if (predictions.entries.count(ref) != 0)
        throw ParseError(context(i) + ": duplicate prediction for dialog " + ref.dialog_id +
                         " turn " + std::to_string(ref.turn));
      open = ref;
      state.clear();
      continue;
    }
    if (line.starts_with("state ")) {
      if (!open) throw ParseError(context(i) + ": state outside a prediction block");
      SlotTriple triple;
      try {
        triple = parse_slot_triple(trim(line.substr(6)));
      } catch (const ParseError& e) {
        throw ParseError(context(i) + ": " + e.what());
      }
      check_text_field(triple.value, context(i));
      if (ontology != nullptr && !ontology->has(triple.key()))
        throw ValidationError(context(i) + ": prediction uses slot " + to_string(triple.key()) +
                              " which the ontology does not declare");
      for (const SlotTriple& prev : state) {
        if (prev == triple) throw ParseError(context(i) + ": duplicate entry " + to_string(triple));
        if (!options.multi_value && prev.key() == triple.key())
          throw ParseError(context(i) + ": slot " + to_string(triple.key()) +
                           " already has a value in this prediction");
      }
      state.push_back(std::move(triple));
      continue;
    }
    if (line == "end") {
      if (!open) throw ParseError(context(i) + ": end without prediction");
      std::sort(state.begin(), state.end());
      predictions.entries.emplace(*open, std::move(state));
      state.clear();
      open.reset();
      continue;
    }
    throw ParseError(context(i) + ": unrecognized line \"" + std::string(line) + "\"");
  }
  if (open) throw ParseError(path.filename().string() + ": unterminated prediction block");
  return predictions;
}

Diagnostics validate_against_ontology(const Corpus& corpus, const Ontology& ontology,
                                      const NormalizationConfig& norm) {
  Diagnostics diags;
  for (const Dialog& dialog : corpus.dialogs) {
    for (const DialogTurn& turn : dialog.turns) {
      std::string where = "dialog " + dialog.id + " turn " + std::to_string(turn.index);
      for (const SlotTriple& triple : turn.state) {
        const OntologyEntry* entry = ontology.find(triple.key());
        if (entry == nullptr) {
          diags.push_back({Severity::error, where,
                           "slot " + to_string(triple.key()) + " is not in the ontology"});
          continue;
        }
        if (!entry->categorical) continue;
        std::string value = normalize_text(triple.value, norm);
        if (const auto* table = norm.synonyms_for(triple.key())) {
          auto it = table->find(value);
          if (it != table->end()) value = it->second;
        }
        if (!std::binary_search(entry->values.begin(), entry->values.end(), value)) {
          diags.push_back({Severity::warning, where,
                           "value \"" + triple.value + "\" is outside the categorical set of " +
                               to_string(triple.key())});
        }
      }
    }
  }
  return diags;
}

Diagnostics check_database(const EntityDatabase& database, const Ontology& ontology,
                           const NormalizationConfig& norm) {
  Diagnostics diags;
  for (const auto& [domain, records] : database.records) {
    for (std::size_t r = 0; r < records.size(); ++r) {
      for (const auto& [slot_type, raw] : records[r]) {
        const OntologyEntry* entry = ontology.find({domain, slot_type});
        if (entry == nullptr || !entry->categorical) continue;
        std::string value = normalize_text(raw, norm);
        if (const auto* table = norm.synonyms_for({domain, slot_type})) {
          auto it = table->find(value);
          if (it != table->end()) value = it->second;
        }
        if (!std::binary_search(entry->values.begin(), entry->values.end(), value)) {
          diags.push_back({Severity::warning,
                           domain + " entity " + std::to_string(r),
                           "field " + slot_type + "=\"" + raw +
                               "\" is outside the categorical set of " + domain + "." + slot_type});
        }
      }
    }
  }
  return diags;
}

}  // namespace dstdoctor
