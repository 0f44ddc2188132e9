#include "dstdoctor/bias.hpp"

#include <algorithm>
#include <cmath>

#include "dstdoctor/diagnostics.hpp"
#include "dstdoctor/parallel.hpp"
#include "text_util.hpp"

namespace dstdoctor {

CountingPolicy parse_counting_policy(std::string_view name) {
  if (name == "final") return CountingPolicy::per_dialog_final_state;
  if (name == "turns") return CountingPolicy::per_turn;
  if (name == "assignments") return CountingPolicy::per_new_assignment;
  throw ParseError("unknown counting policy \"" + std::string(name) +
                   "\"; expected final, turns, or assignments");
}

std::string_view to_string(CountingPolicy policy) {
  switch (policy) {
    case CountingPolicy::per_dialog_final_state: return "final";
    case CountingPolicy::per_turn: return "turns";
    case CountingPolicy::per_new_assignment: return "assignments";
  }
  return "final";
}

std::uint64_t FrequencyVector::total() const {
  std::uint64_t sum = 0;
  for (const auto& [value, count] : counts) sum += count;
  return sum;
}

std::vector<double> FrequencyVector::relative() const {
  std::vector<double> r;
  r.reserve(counts.size());
  double denom = static_cast<double>(total());
  for (const auto& [value, count] : counts) r.push_back(static_cast<double>(count) / denom);
  return r;
}

namespace {

using SlotCounts = std::map<SlotKey, std::map<std::string, std::uint64_t>>;

void count_dialog(const Dialog& dialog, CountingPolicy policy, const NormalizationConfig& norm,
                  SlotCounts& into) {
  auto bump = [&](const SlotTriple& triple) {
    std::string value = normalize_text(triple.value, norm);
    if (const auto* table = norm.synonyms_for(triple.key())) {
      auto it = table->find(value);
      if (it != table->end()) value = it->second;
    }
    ++into[triple.key()][value];
  };

  switch (policy) {
    case CountingPolicy::per_dialog_final_state: {
      if (!dialog.turns.empty()) {
        for (const SlotTriple& triple : dialog.turns.back().state) bump(triple);
      }
      return;
    }
    case CountingPolicy::per_turn: {
      for (const DialogTurn& turn : dialog.turns) {
        for (const SlotTriple& triple : turn.state) bump(triple);
      }
      return;
    }
    case CountingPolicy::per_new_assignment: {
      // Counts a value once per streak: when its slot first gains it, or
      // regains it after holding something else.
      std::map<SlotKey, std::vector<std::string>> last;
      for (const DialogTurn& turn : dialog.turns) {
        std::map<SlotKey, std::vector<std::string>> current;
        for (const SlotTriple& triple : turn.state)
          current[triple.key()].push_back(normalize_text(triple.value, norm));
        for (const auto& [key, values] : current) {
          auto prev = last.find(key);
          for (const std::string& value : values) {
            bool had = prev != last.end() &&
                       std::find(prev->second.begin(), prev->second.end(), value) !=
                           prev->second.end();
            if (!had) {
              std::string canon = value;
              if (const auto* table = norm.synonyms_for(key)) {
                auto it = table->find(canon);
                if (it != table->end()) canon = it->second;
              }
              ++into[key][canon];
            }
          }
        }
        last = std::move(current);
      }
      return;
    }
  }
}

}  // namespace

std::vector<FrequencyVector> count_slot_values(const Corpus& corpus, CountingPolicy policy,
                                               const NormalizationConfig& norm, unsigned jobs) {
  std::vector<SlotCounts> partial(corpus.dialogs.size());
  parallel_for(corpus.dialogs.size(), jobs, [&](std::size_t i) {
    count_dialog(corpus.dialogs[i], policy, norm, partial[i]);
  });

  SlotCounts merged;
  for (const SlotCounts& part : partial) {
    for (const auto& [key, counts] : part) {
      auto& sink = merged[key];
      for (const auto& [value, count] : counts) sink[value] += count;
    }
  }

  std::vector<FrequencyVector> out;
  out.reserve(merged.size());
  for (auto& [key, counts] : merged)
    out.push_back({key.domain, key.slot_type, std::move(counts)});
  return out;
}

double shannon_normalized(const FrequencyVector& freq) {
  std::size_t support = freq.support();
  if (support < 2) return 0.0;
  double h = 0.0;
  for (double r : freq.relative()) h -= r * std::log(r);
  return h / std::log(static_cast<double>(support));
}

double min_entropy_normalized(const FrequencyVector& freq) {
  std::size_t support = freq.support();
  if (support < 2) return 0.0;
  double top = 0.0;
  for (double r : freq.relative()) top = std::max(top, r);
  return -std::log(top) / std::log(static_cast<double>(support));
}

BiasScore score_frequency(const FrequencyVector& freq) {
  BiasScore score;
  score.domain = freq.domain;
  score.slot_type = freq.slot_type;
  score.support = freq.support();
  score.degenerate = score.support < 2;
  score.shannon = shannon_normalized(freq);
  score.min_entropy = min_entropy_normalized(freq);

  std::uint64_t best = 0;
  for (const auto& [value, count] : freq.counts) {
    if (count > best) {  // ties keep the lexicographically first value
      best = count;
      score.top_value = value;
    }
  }
  std::uint64_t total = freq.total();
  score.top_frequency = total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
  return score;
}

std::vector<BiasScore> bias_report(const Corpus& corpus, CountingPolicy policy,
                                   const NormalizationConfig& norm, unsigned jobs) {
  std::vector<BiasScore> scores;
  for (const FrequencyVector& freq : count_slot_values(corpus, policy, norm, jobs))
    scores.push_back(score_frequency(freq));
  std::sort(scores.begin(), scores.end(), [](const BiasScore& a, const BiasScore& b) {
    if (a.shannon != b.shannon) return a.shannon < b.shannon;
    return std::tie(a.domain, a.slot_type) < std::tie(b.domain, b.slot_type);
  });
  return scores;
}

std::string render_bias_table(std::span<const BiasScore> scores, CountingPolicy policy) {
  std::string out = "# counting policy: " + std::string(to_string(policy)) + "\n";
  out += "domain\tslot_type\tsupport\tshannon\tmin_entropy\ttop_value\ttop_frequency\tdegenerate\n";
  for (const BiasScore& s : scores) {
    out += s.domain + "\t" + s.slot_type + "\t" + std::to_string(s.support) + "\t" +
           detail::format_fixed(s.shannon, 3) + "\t" + detail::format_fixed(s.min_entropy, 3) +
           "\t" + detail::tsv_escape(s.top_value) + "\t" +
           detail::format_fixed(s.top_frequency, 3) + "\t" + (s.degenerate ? "true" : "false") +
           "\n";
  }
  return out;
}

void write_bias_table(std::span<const BiasScore> scores, CountingPolicy policy,
                      const std::filesystem::path& path) {
  detail::write_file_atomic(path, render_bias_table(scores, policy));
}

std::vector<BiasScore> read_bias_table(const std::filesystem::path& path) {
  std::vector<BiasScore> scores;
  auto lines = detail::read_lines(path);
  bool saw_header = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (detail::is_skippable_line(line)) continue;
    if (!saw_header) {
      if (!line.starts_with("domain\t"))
        throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                         ": expected the bias table header");
      saw_header = true;
      continue;
    }
    auto cells = detail::split(line, '\t');
    if (cells.size() != 8)
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": expected 8 columns");
    BiasScore s;
    s.domain = std::string(cells[0]);
    s.slot_type = std::string(cells[1]);
    s.support = detail::parse_uint(cells[2], "support");
    s.shannon = detail::parse_double(cells[3], "shannon");
    s.min_entropy = detail::parse_double(cells[4], "min_entropy");
    s.top_value = detail::tsv_unescape(cells[5]);
    s.top_frequency = detail::parse_double(cells[6], "top_frequency");
    if (cells[7] == "true") s.degenerate = true;
    else if (cells[7] == "false") s.degenerate = false;
    else
      throw ParseError(path.filename().string() + ":" + std::to_string(i + 1) +
                       ": degenerate must be true or false");
    scores.push_back(std::move(s));
  }
  if (!saw_header) throw ParseError(path.filename().string() + ": missing bias table header");
  return scores;
}

}  // namespace dstdoctor
