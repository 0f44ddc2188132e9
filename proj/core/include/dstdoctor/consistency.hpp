#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dstdoctor/canonicalize.hpp"
#include "dstdoctor/model.hpp"

namespace dstdoctor {

enum class Side { user, system };
std::string_view to_string(Side side);
Side parse_side(std::string_view name);

/// A word-boundary occurrence of a known slot value in an utterance.
/// `value` is the canonical (normalized) form; the raw utterance substring
/// at [begin, end) normalizes to a variant of it.
struct MentionCandidate {
  std::string dialog_id;
  int turn = 0;
  Side side = Side::user;
  std::string domain;
  std::string slot_type;
  std::string value;
  std::size_t begin = 0, end = 0;  // byte offsets in the raw utterance

  bool operator==(const MentionCandidate&) const = default;
};

struct DetectionConfig {
  NormalizationConfig norm;
  // Overlap tie-breaking for equally long matches: earlier slot types win.
  std::vector<std::string> slot_priority;
  // Normalized values never used for mention detection (closed-class noise
  // like bare "yes"/"no"; their utterance phrasings are reachable through
  // synonym variants instead).
  std::set<std::string> value_stoplist;
  std::size_t min_value_chars = 2;
  // When set, user-side detection also proposes replacing an existing
  // different value. Off by default: this pass only adds forgotten slots.
  bool propose_overwrites = false;

  static DetectionConfig defaults();
};

/// Immutable multi-pattern matcher over the ontology and database value
/// vocabulary (plus synonym variants). Build once, share across workers.
class MentionIndex {
 public:
  MentionIndex(const Ontology& ontology, const EntityDatabase& database,
               const DetectionConfig& config);
  ~MentionIndex();
  MentionIndex(MentionIndex&&) noexcept;
  MentionIndex& operator=(MentionIndex&&) noexcept;

  const DetectionConfig& config() const;

  /// Position of `slot_type` in the configured priority list; one past the
  /// end for types the list does not name (lowest priority).
  std::size_t priority_rank(const std::string& slot_type) const;

  struct Match {
    std::string domain, slot_type, value;  // canonical value
    std::size_t token_begin = 0, token_count = 0;
    std::size_t begin = 0, end = 0;        // raw byte span
  };

  /// All matches in `raw` restricted to `active_domains`, overlaps
  /// unresolved. Sorted by (token_begin, token_count, domain, slot_type, value).
  std::vector<Match> find_all(std::string_view raw,
                              std::span<const std::string> active_domains) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Every maximal word-boundary occurrence of a known value in each turn and
/// side, restricted to the dialog's active domains. Overlapping matches are
/// resolved by (1) longest span, (2) slot-type priority, (3) leftmost, then
/// lexicographic (domain, slot_type, value) as a final deterministic tie.
std::vector<MentionCandidate> detect_mentions(const Dialog& dialog, const MentionIndex& index);
std::vector<MentionCandidate> detect_mentions(const Dialog& dialog, const Ontology& ontology,
                                              const EntityDatabase& database,
                                              const DetectionConfig& config);

enum class CorrectionStatus { proposed, applied, rejected };
std::string_view to_string(CorrectionStatus status);
CorrectionStatus parse_correction_status(std::string_view name);

/// Rule id used for user-side proposals, which need no pattern match.
inline constexpr const char* kUserMentionRule = "user-mention";

struct CorrectionRecord {
  std::string dialog_id;
  int turn = 0;
  SlotTriple added;
  Side side = Side::user;
  std::string rule_id;
  CorrectionStatus status = CorrectionStatus::proposed;

  bool operator==(const CorrectionRecord&) const = default;
};

/// A system-side correction rule. The trigger is a regular-expression
/// template with a single {value} placeholder, matched against the
/// normalized pair "<system response>\n<next user utterance>"; rejection
/// patterns veto on the normalized user reply alone.
struct CorrectionRule {
  std::string rule_id;
  std::string domain;      // "*" matches any
  std::string slot_type;   // "*" matches any
  Side side = Side::system;
  std::string trigger;
  std::vector<std::string> reject;
};

class RuleSet {
 public:
  explicit RuleSet(std::vector<CorrectionRule> rules);  // compiles, validates
  ~RuleSet();
  RuleSet(RuleSet&&) noexcept;
  RuleSet& operator=(RuleSet&&) noexcept;

  std::span<const CorrectionRule> rules() const;

  /// First rule (file order) for (domain, slot_type) whose trigger matches
  /// the pair and whose rejection patterns all miss the reply; empty when
  /// none. Texts must already be normalized.
  const CorrectionRule* match(const SlotKey& key, std::string_view value,
                              std::string_view system_text, std::string_view reply_text) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

RuleSet load_rules(const std::filesystem::path& path);

/// User side: a mention at turn t whose slot has no value in turn t's state
/// becomes a proposal at turn t. Slots already holding a different value are
/// left alone unless propose_overwrites is set.
std::vector<CorrectionRecord> detect_missing_user_annotations(const Dialog& dialog,
                                                              const MentionIndex& index);

/// System side: a mention in turn t's system response whose slot is unfilled
/// becomes a proposal at turn t+1 (the turn whose user utterance reacts to
/// the offer) iff a rule's trigger matches the (system response, next user
/// utterance) pair and no rejection pattern matches the reply.
std::vector<CorrectionRecord> detect_missing_system_annotations(const Dialog& dialog,
                                                                const RuleSet& rules,
                                                                const MentionIndex& index);

/// Runs the user pass then the system pass with a shared overlay, so the
/// combined proposal list is free of internal redundancy and re-running on
/// a fixed corpus proposes nothing.
std::vector<CorrectionRecord> detect_corrections(const Dialog& dialog, const RuleSet& rules,
                                                 const MentionIndex& index);
std::vector<CorrectionRecord> detect_corrections(const Corpus& corpus, const RuleSet& rules,
                                                 const MentionIndex& index, unsigned jobs = 1);

struct ApplyOutcome {
  Corpus corpus;
  std::vector<CorrectionRecord> records;  // statuses updated to applied/rejected
};

/// Inserts each added triple at its turn and propagates it forward until a
/// turn that sets a different value for the same slot. Records whose triple
/// is already present at their turn are marked rejected (idempotence);
/// records for the same (dialog, turn, slot) with different values throw.
ApplyOutcome apply_corrections(const Corpus& corpus, std::vector<CorrectionRecord> records);

struct CorrectionStats {
  struct Row {
    std::string split, domain, slot_type;
    std::uint64_t modified_dialogs = 0;
    std::uint64_t domain_dialogs = 0;   // dialogs whose domain list contains `domain`
    std::uint64_t user_added = 0;       // applied records by source side
    std::uint64_t system_added = 0;

    double percent() const;
    bool operator==(const Row&) const = default;
  };
  struct DomainTotal {
    std::string split, domain;
    std::uint64_t modified_dialogs = 0;  // distinct dialogs, not a sum of rows
    std::uint64_t domain_dialogs = 0;

    double percent() const;
    bool operator==(const DomainTotal&) const = default;
  };
  struct SplitTotal {
    std::string split;
    std::uint64_t modified_dialogs = 0;
    std::uint64_t total_dialogs = 0;

    double percent() const;
    bool operator==(const SplitTotal&) const = default;
  };

  std::vector<Row> rows;                // sorted by (split, domain, slot_type)
  std::vector<DomainTotal> domain_totals;
  std::vector<SplitTotal> split_totals;

  bool operator==(const CorrectionStats&) const = default;
};

CorrectionStats correction_stats(const Corpus& before, const Corpus& after,
                                 std::span<const CorrectionRecord> records);
CorrectionStats merge_stats(std::span<const CorrectionStats> parts);

/// Modified-dialog counts with percentages, one column per split present.
std::string render_stats_table(const CorrectionStats& stats);
/// Per-slot user/system source fractions of the applied additions.
std::string render_source_ratio_table(const CorrectionStats& stats);

void write_stats(const CorrectionStats& stats, const std::filesystem::path& path);
CorrectionStats read_stats(const std::filesystem::path& path);

// Correction-record artifact (tab-separated rows).
void write_records(std::span<const CorrectionRecord> records, const std::filesystem::path& path);
std::vector<CorrectionRecord> read_records(const std::filesystem::path& path);

/// Verification worksheet: a seeded stratified sample of modified and
/// unchanged dialogs with their diffs, for human labeling.
struct WorksheetRow {
  std::string label;      // filled by the reviewer: correct | incorrect
  std::string stratum;    // modified | unchanged
  std::string dialog_id;
  std::string diff;       // human-readable state diff, empty for unchanged

  bool operator==(const WorksheetRow&) const = default;
};

std::vector<WorksheetRow> sample_verification(const Corpus& before, const Corpus& after,
                                              std::size_t n_modified, std::size_t n_unchanged,
                                              std::uint64_t seed);

void write_worksheet(std::span<const WorksheetRow> rows, const std::filesystem::path& path);
std::vector<WorksheetRow> read_worksheet(const std::filesystem::path& path);

struct VerificationCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// modified+correct -> tp, modified+incorrect -> fp,
/// unchanged+correct -> tn, unchanged+incorrect -> fn.
/// Rows with other labels throw.
VerificationCounts worksheet_counts(std::span<const WorksheetRow> rows);

struct VerificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<std::string> warnings;  // zero-denominator cases, reported as 0.0
};

VerificationMetrics verification_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn,
                                         std::uint64_t tn);

std::string render_verification_report(const VerificationCounts& counts,
                                       const VerificationMetrics& metrics);

}  // namespace dstdoctor
