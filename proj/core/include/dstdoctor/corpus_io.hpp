#pragma once

#include <filesystem>
#include <string>

#include "dstdoctor/canonicalize.hpp"
#include "dstdoctor/diagnostics.hpp"
#include "dstdoctor/model.hpp"

namespace dstdoctor {

enum class CorpusFormat { native, multiwoz22 };

CorpusFormat parse_corpus_format(std::string_view name);  // "native" | "multiwoz22"

struct LoadOptions {
  CorpusFormat format = CorpusFormat::native;
  bool multi_value = false;          // allow several values per slot in one turn
  std::string default_split = "test";  // used when the file carries no split
  NormalizationConfig norm;          // for value validation only
};

/// Loads and validates a corpus. Structural problems (syntax errors,
/// duplicate dialog ids, non-consecutive turn indices, duplicate slots
/// without multi-value mode, empty system response before the final turn,
/// state domains missing from the dialog's domain list) throw; findings
/// that valid corpora are known to contain go to `diags`.
/// Dialogs are sorted lexicographically by id after load.
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options = {},
                   Diagnostics* diags = nullptr);

/// Byte-deterministic native-format writer; load_corpus(write_corpus(c)) == c.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string render_corpus(const Corpus& corpus);

Ontology load_ontology(const std::filesystem::path& path,
                       CorpusFormat format = CorpusFormat::native,
                       const NormalizationConfig& norm = {});

EntityDatabase load_database(const std::filesystem::path& path);

/// Every entry must reference an existing turn of `gold`, and when an
/// ontology is given every (domain, slot_type) must be declared in it;
/// violations throw naming the offender.
PredictionSet load_predictions(const std::filesystem::path& path, const Corpus& gold,
                               const Ontology* ontology = nullptr,
                               const LoadOptions& options = {});

/// Cross-checks: unknown (domain, slot_type) pairs are errors; values
/// outside a categorical entry's set are warnings (source data is known to
/// contain them).
Diagnostics validate_against_ontology(const Corpus& corpus, const Ontology& ontology,
                                      const NormalizationConfig& norm = {});

/// Database records whose value for an ontology-listed slot type does not
/// normalize to a member of that entry. Reported, not fatal.
Diagnostics check_database(const EntityDatabase& database, const Ontology& ontology,
                           const NormalizationConfig& norm = {});

}  // namespace dstdoctor
