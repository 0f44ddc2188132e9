#include "dstdoctor/model.hpp"

#include <algorithm>

#include "dstdoctor/canonicalize.hpp"
#include "text_util.hpp"

namespace dstdoctor {

std::string render(const Diagnostic& d) {
  std::string out = d.severity == Severity::error ? "error: " : "warning: ";
  if (!d.where.empty()) {
    out += d.where;
    out += ": ";
  }
  out += d.message;
  return out;
}

std::string to_string(const SlotKey& key) { return key.domain + "." + key.slot_type; }

SlotKey parse_slot_key(std::string_view text) {
  std::size_t dot = text.find('.');
  if (dot == std::string_view::npos)
    throw ParseError("expected domain.slot_type, got \"" + std::string(text) + "\"");
  SlotKey key{std::string(text.substr(0, dot)), std::string(text.substr(dot + 1))};
  if (!is_identifier(key.domain) || !is_identifier(key.slot_type))
    throw ParseError("domain and slot type must match [a-z0-9_]+, got \"" + std::string(text) +
                     "\"");
  return key;
}

std::string to_string(const SlotTriple& triple) {
  return triple.domain + "." + triple.slot_type + "=" + triple.value;
}

SlotTriple parse_slot_triple(std::string_view text) {
  std::size_t eq = text.find('=');
  if (eq == std::string_view::npos)
    throw ParseError("expected domain.slot_type=value, got \"" + std::string(text) + "\"");
  SlotKey key = parse_slot_key(text.substr(0, eq));
  std::string value(detail::trim(text.substr(eq + 1)));
  if (value.empty()) throw ParseError("empty value in \"" + std::string(text) + "\"");
  return {std::move(key.domain), std::move(key.slot_type), std::move(value)};
}

std::vector<std::string> DialogTurn::values(const SlotKey& key) const {
  std::vector<std::string> out;
  for (const SlotTriple& t : state) {
    if (t.domain == key.domain && t.slot_type == key.slot_type) out.push_back(t.value);
  }
  return out;
}

bool DialogTurn::has_slot(const SlotKey& key) const {
  for (const SlotTriple& t : state) {
    if (t.domain == key.domain && t.slot_type == key.slot_type) return true;
  }
  return false;
}

bool Dialog::has_domain(std::string_view domain) const {
  return std::find(domains.begin(), domains.end(), domain) != domains.end();
}

const Dialog* Corpus::find(std::string_view id) const {
  auto it = std::lower_bound(dialogs.begin(), dialogs.end(), id,
                             [](const Dialog& d, std::string_view v) { return d.id < v; });
  if (it == dialogs.end() || it->id != id) return nullptr;
  return &*it;
}

const OntologyEntry* Ontology::find(const SlotKey& key) const {
  auto it = entries.find(key);
  return it == entries.end() ? nullptr : &it->second;
}

bool Ontology::contains_value(const SlotKey& key, std::string_view normalized_value) const {
  const OntologyEntry* entry = find(key);
  if (entry == nullptr) return false;
  return std::binary_search(entry->values.begin(), entry->values.end(), normalized_value);
}

Diagnostics check_cumulative_states(const Corpus& corpus) {
  Diagnostics diags;
  for (const Dialog& dialog : corpus.dialogs) {
    for (std::size_t t = 1; t < dialog.turns.size(); ++t) {
      const DialogTurn& prev = dialog.turns[t - 1];
      const DialogTurn& cur = dialog.turns[t];
      for (const SlotTriple& triple : prev.state) {
        if (!cur.has_slot(triple.key())) {
          diags.push_back({Severity::warning,
                           "dialog " + dialog.id + " turn " + std::to_string(cur.index),
                           to_string(triple) + " disappears without an overwrite"});
        }
      }
    }
  }
  return diags;
}

}  // namespace dstdoctor
