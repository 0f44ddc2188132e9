#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dstdoctor/model.hpp"

namespace dstdoctor {

/// Text normalization settings. Normalization is applied to comparisons
/// (mention detection, value matching, scoring), never to stored text.
struct NormalizationConfig {
  bool lowercase = true;
  std::string strip_punctuation = ".,!?;:\"";  // replaced by a space
  bool collapse_whitespace = true;             // fold runs, trim ends
  bool strip_diacritics = false;               // ASCII-oriented data; off by default
  // normalized variant -> canonical value, per slot. Applied exactly once:
  // the loader rejects tables where a target is also a variant.
  std::map<SlotKey, std::map<std::string, std::string>> synonyms;

  const std::map<std::string, std::string>* synonyms_for(const SlotKey& key) const;
};

/// Deterministic and idempotent: normalize(normalize(x)) == normalize(x).
/// Synonym tables are not applied here; they are per-slot and belong to
/// canonical_value.
std::string normalize_text(std::string_view raw, const NormalizationConfig& config = {});

/// Normalized text plus a byte-level map back into the raw input, so that
/// matches found on normalized text can be reported as raw spans.
struct NormalizedText {
  std::string text;
  std::vector<std::size_t> source;      // source[i] = first raw byte of text[i]
  std::vector<std::size_t> source_end;  // one past the last raw byte of text[i]
};

NormalizedText normalize_with_map(std::string_view raw, const NormalizationConfig& config = {});

/// A whitespace-delimited token of a NormalizedText, with both its span in
/// the normalized string and the span of the raw bytes it came from.
struct TokenSpan {
  std::size_t begin = 0, end = 0;          // [begin, end) in NormalizedText.text
  std::size_t raw_begin = 0, raw_end = 0;  // [raw_begin, raw_end) in the raw input
};

std::vector<TokenSpan> tokenize(const NormalizedText& text);

/// Resolves a raw string to the ontology value it denotes for `key`:
/// normalize, apply the slot's synonym mapping once, then look the result
/// up in the ontology entry. Never fuzzy. Returns nullopt when the value is
/// not a member. Throws ValidationError when `key` is not in the ontology.
std::optional<std::string> canonical_value(const SlotKey& key, std::string_view raw,
                                           const Ontology& ontology,
                                           const NormalizationConfig& config = {});

/// Loads a synonym table file (see docs/formats.md) into `base`. Variants
/// and targets are normalized with `base`'s settings. Rejects tables where
/// any target is also a variant of the same slot (no transitive chains).
NormalizationConfig load_synonyms(const std::filesystem::path& path,
                                  NormalizationConfig base = {});

/// For categorical slots, synonym targets must be ontology members.
Diagnostics check_synonyms(const NormalizationConfig& config, const Ontology& ontology);

}  // namespace dstdoctor
