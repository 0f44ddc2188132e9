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

/// What counts as one occurrence of a slot value.
///   per_dialog_final_state: each value in a dialog's last turn, once per dialog
///   per_turn:               each value in every turn's state
///   per_new_assignment:     each time a slot gains a value or changes value
enum class CountingPolicy { per_dialog_final_state, per_turn, per_new_assignment };

CountingPolicy parse_counting_policy(std::string_view name);
std::string_view to_string(CountingPolicy policy);

/// Occurrence counts for one (domain, slot type). Counts are keyed by
/// normalized value and are always positive; the support size R and the
/// relative-frequency vector are derived from them.
struct FrequencyVector {
  std::string domain;
  std::string slot_type;
  std::map<std::string, std::uint64_t> counts;

  std::uint64_t total() const;
  std::size_t support() const { return counts.size(); }  // R
  std::vector<double> relative() const;                  // r_i, sums to 1
};

std::vector<FrequencyVector> count_slot_values(const Corpus& corpus, CountingPolicy policy,
                                               const NormalizationConfig& norm = {},
                                               unsigned jobs = 1);

/// Normalized Shannon entropy H1/H0 = sum_i r_i * log_R(1/r_i).
/// 1 = uniform, 0 = deterministic. Computed in natural base and divided by
/// ln R, so the base cancels. Returns 0 for support < 2 (degenerate).
double shannon_normalized(const FrequencyVector& freq);

/// Normalized min-entropy H_inf/H0 = log_R(1 / max_i r_i): the normalized
/// surprisal of the most frequent value. Sensitive to head concentration.
/// Returns 0 for support < 2 (degenerate).
double min_entropy_normalized(const FrequencyVector& freq);

struct BiasScore {
  std::string domain;
  std::string slot_type;
  std::size_t support = 0;          // R
  double shannon = 0.0;             // H1/H0
  double min_entropy = 0.0;         // Hinf/H0
  bool degenerate = false;          // R < 2: both metrics undefined, reported as 0
  std::string top_value;
  double top_frequency = 0.0;

  bool operator==(const BiasScore&) const = default;
};

BiasScore score_frequency(const FrequencyVector& freq);

/// Scores every slot of the corpus, sorted ascending by H1/H0 (most biased
/// first), ties broken by (domain, slot_type).
std::vector<BiasScore> bias_report(const Corpus& corpus, CountingPolicy policy,
                                   const NormalizationConfig& norm = {}, unsigned jobs = 1);

/// Tab-separated table: domain, slot_type, R, H1/H0, Hinf/H0, top value,
/// top frequency, degenerate flag. A leading comment line names the
/// counting policy.
std::string render_bias_table(std::span<const BiasScore> scores, CountingPolicy policy);

void write_bias_table(std::span<const BiasScore> scores, CountingPolicy policy,
                      const std::filesystem::path& path);
std::vector<BiasScore> read_bias_table(const std::filesystem::path& path);

}  // namespace dstdoctor
