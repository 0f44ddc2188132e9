#include "dstdoctor/canonicalize.hpp"

#include <algorithm>

#include "dstdoctor/diagnostics.hpp"
#include "text_util.hpp"

namespace dstdoctor {
namespace {

bool is_space_byte(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// ASCII base letter for a two-byte UTF-8 Latin-1 accented letter, 0 when the
/// sequence is not one. Covers U+00C0..U+00FF minus the non-letter signs.
char ascii_base(unsigned char b0, unsigned char b1) {
  if (b0 != 0xC3) return 0;
  unsigned cp = 0xC0 + (b1 & 0x3F);  // b1 in [0x80, 0xBF] encodes U+00C0..U+00FF
  if (b1 < 0x80 || b1 > 0xBF) return 0;
  struct Range {
    unsigned lo, hi;
    char base;
  };
  static constexpr Range kRanges[] = {
      {0xC0, 0xC5, 'A'}, {0xC7, 0xC7, 'C'}, {0xC8, 0xCB, 'E'}, {0xCC, 0xCF, 'I'},
      {0xD1, 0xD1, 'N'}, {0xD2, 0xD6, 'O'}, {0xD8, 0xD8, 'O'}, {0xD9, 0xDC, 'U'},
      {0xDD, 0xDD, 'Y'}, {0xE0, 0xE5, 'a'}, {0xE7, 0xE7, 'c'}, {0xE8, 0xEB, 'e'},
      {0xEC, 0xEF, 'i'}, {0xF1, 0xF1, 'n'}, {0xF2, 0xF6, 'o'}, {0xF8, 0xF8, 'o'},
      {0xF9, 0xFC, 'u'}, {0xFD, 0xFD, 'y'}, {0xFF, 0xFF, 'y'},
  };
  for (const Range& r : kRanges) {
    if (cp >= r.lo && cp <= r.hi) return r.base;
  }
  return 0;
}

}  // namespace

const std::map<std::string, std::string>* NormalizationConfig::synonyms_for(
    const SlotKey& key) const {
  auto it = synonyms.find(key);
  return it == synonyms.end() ? nullptr : &it->second;
}

NormalizedText normalize_with_map(std::string_view raw, const NormalizationConfig& config) {
  NormalizedText out;
  out.text.reserve(raw.size());
  out.source.reserve(raw.size());
  out.source_end.reserve(raw.size());

  bool pending_space = false;
  std::size_t pending_src = 0;
  auto emit = [&](char c, std::size_t begin, std::size_t end) {
    if (pending_space) {
      out.text.push_back(' ');
      out.source.push_back(pending_src);
      out.source_end.push_back(pending_src + 1);
      pending_space = false;
    }
    out.text.push_back(c);
    out.source.push_back(begin);
    out.source_end.push_back(end);
  };
  auto space_at = [&](std::size_t i) {
    if (config.collapse_whitespace) {
      // Leading spaces vanish; inner runs fold into one, emitted lazily so
      // trailing runs vanish too.
      if (!out.text.empty() && !pending_space) {
        pending_space = true;
        pending_src = i;
      }
    } else {
      emit(' ', i, i + 1);
      pending_space = false;
    }
  };

  for (std::size_t i = 0; i < raw.size();) {
    unsigned char c = static_cast<unsigned char>(raw[i]);
    if (config.strip_diacritics && i + 1 < raw.size()) {
      if (char base = ascii_base(c, static_cast<unsigned char>(raw[i + 1]))) {
        if (config.lowercase && base >= 'A' && base <= 'Z') base = static_cast<char>(base - 'A' + 'a');
        emit(base, i, i + 2);
        i += 2;
        continue;
      }
    }
    if (is_space_byte(c) || config.strip_punctuation.find(static_cast<char>(c)) !=
                                std::string::npos) {
      space_at(i);
    } else {
      char m = static_cast<char>(c);
      if (config.lowercase && m >= 'A' && m <= 'Z') m = static_cast<char>(m - 'A' + 'a');
      emit(m, i, i + 1);
    }
    ++i;
  }
  return out;
}

std::string normalize_text(std::string_view raw, const NormalizationConfig& config) {
  return normalize_with_map(raw, config).text;
}

std::vector<TokenSpan> tokenize(const NormalizedText& text) {
  std::vector<TokenSpan> tokens;
  const std::string& s = text.text;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t begin = i;
    while (i < s.size() && s[i] != ' ') ++i;
    if (i > begin) tokens.push_back({begin, i, text.source[begin], text.source_end[i - 1]});
  }
  return tokens;
}

std::optional<std::string> canonical_value(const SlotKey& key, std::string_view raw,
                                           const Ontology& ontology,
                                           const NormalizationConfig& config) {
  const OntologyEntry* entry = ontology.find(key);
  if (entry == nullptr) throw ValidationError("canonical_value: unknown slot " + to_string(key));
  std::string value = normalize_text(raw, config);
  if (const auto* table = config.synonyms_for(key)) {
    auto it = table->find(value);
    if (it != table->end()) value = it->second;
  }
  if (std::binary_search(entry->values.begin(), entry->values.end(), value)) return value;
  return std::nullopt;
}

NormalizationConfig load_synonyms(const std::filesystem::path& path, NormalizationConfig base) {
  auto lines = detail::read_lines(path);
  auto context = [&](std::size_t i) { return path.filename().string() + ":" + std::to_string(i + 1); };

  std::optional<SlotKey> open;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = detail::trim(lines[i]);
    if (detail::is_skippable_line(line)) continue;
    if (line.starts_with("synonym ")) {
      if (open) throw ParseError(context(i) + ": synonym block not closed with end");
      open = parse_slot_key(detail::trim(line.substr(8)));
      continue;
    }
    if (line == "end") {
      if (!open) throw ParseError(context(i) + ": end without synonym");
      open.reset();
      continue;
    }
    if (line.starts_with("map ")) {
      if (!open) throw ParseError(context(i) + ": map outside a synonym block");
      std::string_view rest = line.substr(4);
      std::size_t tab = rest.find('\t');
      if (tab == std::string_view::npos)
        throw ParseError(context(i) + ": map needs variant<TAB>canonical");
      std::string variant = normalize_text(detail::trim(rest.substr(0, tab)), base);
      std::string target = normalize_text(detail::trim(rest.substr(tab + 1)), base);
      if (variant.empty() || target.empty())
        throw ParseError(context(i) + ": empty variant or canonical");
      auto& table = base.synonyms[*open];
      auto [it, inserted] = table.emplace(variant, target);
      if (!inserted && it->second != target)
        throw ParseError(context(i) + ": variant \"" + variant + "\" already maps to \"" +
                         it->second + "\"");
      continue;
    }
    throw ParseError(context(i) + ": unrecognized line \"" + std::string(line) + "\"");
  }
  if (open) throw ParseError(path.filename().string() + ": unterminated synonym block");

  // One-step mapping only: a canonical target that is itself a variant would
  // make the result depend on application order.
  for (const auto& [key, table] : base.synonyms) {
    for (const auto& [variant, target] : table) {
      if (table.count(target) != 0)
        throw ParseError(path.filename().string() + ": target \"" + target + "\" of slot " +
                         to_string(key) + " is also a variant");
    }
  }
  return base;
}

Diagnostics check_synonyms(const NormalizationConfig& config, const Ontology& ontology) {
  Diagnostics diags;
  for (const auto& [key, table] : config.synonyms) {
    const OntologyEntry* entry = ontology.find(key);
    if (entry == nullptr) {
      diags.push_back({Severity::warning, to_string(key), "synonym table for a slot the ontology does not declare"});
      continue;
    }
    if (!entry->categorical) continue;
    for (const auto& [variant, target] : table) {
      if (!std::binary_search(entry->values.begin(), entry->values.end(), target)) {
        diags.push_back({Severity::error, to_string(key),
                         "synonym target \"" + target + "\" is not a value of this categorical slot"});
      }
    }
  }
  return diags;
}

}  // namespace dstdoctor
