// dstdoctor: corpus hygiene for dialog state tracking data.
//
// Subcommands:
//   check       detect annotation gaps, write proposals, exit 1 when any
//   fix         detect and apply corrections, write the corrected corpus
//   bias        score per-slot value-distribution bias
//   substitute  swap entity values for unseen ones, seeded
//   eval        score predictions (joint, fuzzy-joint, per-slot)
//   verify      sample a labeling worksheet / score a filled one
//   report      merge artifacts into one human-readable report
//
// Options resolve as: command line > config file (--config or
// DSTDOCTOR_CONFIG) > built-in default. Every run writes
// <out-dir>/<command>.manifest with the resolved settings in config-file
// syntax, so a run can be replayed with --config <manifest>.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dstdoctor/bias.hpp"
#include "dstdoctor/canonicalize.hpp"
#include "dstdoctor/consistency.hpp"
#include "dstdoctor/corpus_io.hpp"
#include "dstdoctor/diagnostics.hpp"
#include "dstdoctor/evaluate.hpp"
#include "dstdoctor/model.hpp"
#include "dstdoctor/substitute.hpp"
#include "dstdoctor/version.hpp"

namespace fs = std::filesystem;
using namespace dstdoctor;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

std::map<std::string, std::string> load_config_file(const fs::path& path) {
  std::map<std::string, std::string> values;
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view = line;
    while (!view.empty() && (view.front() == ' ' || view.front() == '\t')) view.remove_prefix(1);
    if (view.empty() || view.front() == '#') continue;
    std::size_t space = view.find_first_of(" \t");
    if (space == std::string_view::npos)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected \"key value\"");
    std::string key(view.substr(0, space));
    std::string_view rest = view.substr(space + 1);
    while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) rest.remove_prefix(1);
    while (!rest.empty() && (rest.back() == ' ' || rest.back() == '\t')) rest.remove_suffix(1);
    values[key] = std::string(rest);
  }
  return values;
}

/// Ties CLI11 options to config-file keys: a key fills its option only when
/// the flag was not given on the command line, and every bound option lands
/// in the manifest with its resolved value.
class Bindings {
 public:
  void bind_string(CLI::Option* option, std::string key, std::string* target) {
    entries_.push_back({std::move(key), option,
                        [target](const std::string& v) { *target = v; },
                        [target] { return *target; },
                        [target] { return !target->empty(); }});
  }

  void bind_uint(CLI::Option* option, std::string key, unsigned* target) {
    entries_.push_back({std::move(key), option,
                        [target](const std::string& v) {
                          *target = static_cast<unsigned>(std::stoul(v));
                        },
                        [target] { return std::to_string(*target); }, [] { return true; }});
  }

  void bind_uint64(CLI::Option* option, std::string key, std::uint64_t* target) {
    entries_.push_back({std::move(key), option,
                        [target](const std::string& v) { *target = std::stoull(v); },
                        [target] { return std::to_string(*target); }, [] { return true; }});
  }

  void bind_size(CLI::Option* option, std::string key, std::size_t* target) {
    entries_.push_back({std::move(key), option,
                        [target](const std::string& v) { *target = std::stoull(v); },
                        [target] { return std::to_string(*target); }, [] { return true; }});
  }

  void bind_double(CLI::Option* option, std::string key, double* target) {
    entries_.push_back({std::move(key), option,
                        [target](const std::string& v) { *target = std::stod(v); },
                        [target] {
                          char buf[32];
                          std::snprintf(buf, sizeof buf, "%.6g", *target);
                          return std::string(buf);
                        },
                        [] { return true; }});
  }

  void bind_bool(CLI::Option* option, std::string key, bool* target) {
    entries_.push_back({std::move(key), option,
                        [target, key](const std::string& v) {
                          if (v == "true" || v == "1") *target = true;
                          else if (v == "false" || v == "0") *target = false;
                          else
                            throw ParseError("config key " + key +
                                             " needs true or false, got \"" + v + "\"");
                        },
                        [target] { return *target ? "true" : "false"; }, [] { return true; }});
  }

  void require(const std::string& key) {
    for (Entry& entry : entries_) {
      if (entry.key == key) entry.required = true;
    }
  }

  void apply(const std::map<std::string, std::string>& config) {
    for (const Entry& entry : entries_) {
      if (entry.option != nullptr && entry.option->count() > 0) continue;
      auto it = config.find(entry.key);
      if (it != config.end()) entry.set(it->second);
    }
    std::string missing;
    for (const Entry& entry : entries_) {
      if (entry.required && !entry.present()) missing += (missing.empty() ? "" : ", ") + entry.key;
    }
    if (!missing.empty())
      throw ValidationError("missing required settings: " + missing +
                            " (pass the flag or set the config key)");
  }

  std::string manifest(const std::string& command) const {
    std::string out = "# resolved settings for: dstdoctor " + command + "\n";
    for (const Entry& entry : entries_) {
      if (!entry.present()) continue;
      out += entry.key + " " + entry.get() + "\n";
    }
    return out;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* option;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
    std::function<bool()> present;
    bool required = false;
  };
  std::vector<Entry> entries_;
};

void write_text(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  fs::rename(tmp, path);
}

void print_diagnostics(const Diagnostics& diags) {
  for (const Diagnostic& d : diags) std::cerr << render(d) << "\n";
}

struct CommonInputs {
  std::string corpus_path;
  std::string format = "native";
  std::string split = "test";
  std::string ontology_path;
  std::string database_path;
  std::string synonyms_path;
  bool multi_value = false;
};

struct LoadedInputs {
  Corpus corpus;
  Ontology ontology;
  EntityDatabase database;
  NormalizationConfig norm;
};

LoadedInputs load_inputs(const CommonInputs& in, bool need_ontology) {
  LoadedInputs loaded;
  if (!in.synonyms_path.empty()) loaded.norm = load_synonyms(in.synonyms_path);

  LoadOptions options;
  options.format = parse_corpus_format(in.format);
  options.multi_value = in.multi_value;
  options.default_split = in.split;
  options.norm = loaded.norm;

  Diagnostics diags;
  loaded.corpus = load_corpus(in.corpus_path, options, &diags);

  if (!in.ontology_path.empty()) {
    loaded.ontology = load_ontology(in.ontology_path, options.format, loaded.norm);
    if (!loaded.norm.synonyms.empty()) {
      Diagnostics syn = check_synonyms(loaded.norm, loaded.ontology);
      diags.insert(diags.end(), syn.begin(), syn.end());
    }
  } else if (need_ontology) {
    throw ValidationError("this command needs --ontology");
  }

  if (!in.database_path.empty()) {
    loaded.database = load_database(in.database_path);
    if (!in.ontology_path.empty()) {
      Diagnostics db = check_database(loaded.database, loaded.ontology, loaded.norm);
      diags.insert(diags.end(), db.begin(), db.end());
    }
  }
  print_diagnostics(diags);
  return loaded;
}

struct DetectionSummary {
  std::size_t user = 0, system = 0;
  std::set<std::string> dialogs;
};

DetectionSummary summarize(std::span<const CorrectionRecord> records) {
  DetectionSummary summary;
  for (const CorrectionRecord& record : records) {
    (record.side == Side::user ? summary.user : summary.system) += 1;
    summary.dialogs.insert(record.dialog_id);
  }
  return summary;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annotation hygiene for dialog state tracking corpora"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  std::string config_path;
  app.add_option("--config", config_path,
                 "Config file of \"key value\" lines (env: DSTDOCTOR_CONFIG)");

  unsigned jobs = 1;
  std::uint64_t seed = kDefaultSeed;
  std::string out_dir = "out";
  auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads; 0 means all cores");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every sampled or drawn artifact");
  auto* out_opt = app.add_option("--out-dir", out_dir, "Directory for artifacts and manifests");

  CommonInputs in;
  auto add_common = [&](CLI::App* sub, Bindings& bind, bool corpus_required = true) {
    auto* corpus = sub->add_option("--corpus", in.corpus_path, "Corpus file");
    auto* format = sub->add_option("--format", in.format, "Corpus format: native or multiwoz22");
    auto* split = sub->add_option("--split", in.split, "Split label when the file has none");
    auto* ontology = sub->add_option("--ontology", in.ontology_path, "Ontology file");
    auto* database = sub->add_option("--database", in.database_path, "Entity database file");
    auto* synonyms = sub->add_option("--synonyms", in.synonyms_path, "Synonym table file");
    auto* multi = sub->add_flag("--multi-value", in.multi_value,
                                "Allow several values per slot in one turn");
    bind.bind_string(corpus, "corpus", &in.corpus_path);
    bind.bind_string(format, "format", &in.format);
    bind.bind_string(split, "split", &in.split);
    bind.bind_string(ontology, "ontology", &in.ontology_path);
    bind.bind_string(database, "database", &in.database_path);
    bind.bind_string(synonyms, "synonyms", &in.synonyms_path);
    bind.bind_bool(multi, "multi-value", &in.multi_value);
    if (corpus_required) bind.require("corpus");
  };
  auto add_globals = [&](Bindings& bind) {
    bind.bind_uint(jobs_opt, "jobs", &jobs);
    bind.bind_uint64(seed_opt, "seed", &seed);
    bind.bind_string(out_opt, "out-dir", &out_dir);
  };

  // check / fix
  std::string rules_path;
  Bindings check_bind, fix_bind;
  auto* check_cmd = app.add_subcommand("check", "Detect annotation gaps; exit 1 when any");
  auto* fix_cmd = app.add_subcommand("fix", "Detect and apply corrections");
  for (auto [sub, bind] : {std::pair{check_cmd, &check_bind}, std::pair{fix_cmd, &fix_bind}}) {
    sub->fallthrough();
    add_common(sub, *bind);
    auto* rules = sub->add_option("--rules", rules_path, "Correction rule file");
    bind->bind_string(rules, "rules", &rules_path);
    bind->require("rules");
    add_globals(*bind);
  }

  // bias
  std::string policy_name = "final";
  Bindings bias_bind;
  auto* bias_cmd = app.add_subcommand("bias", "Score per-slot value-distribution bias");
  bias_cmd->fallthrough();
  add_common(bias_cmd, bias_bind);
  auto* policy_opt = bias_cmd->add_option("--policy", policy_name,
                                          "Counting policy: final, turns, or assignments");
  bias_bind.bind_string(policy_opt, "policy", &policy_name);
  add_globals(bias_bind);

  // substitute
  std::string lexicon_path, train_path;
  Bindings sub_bind;
  auto* sub_cmd = app.add_subcommand("substitute", "Swap entity values for unseen ones");
  sub_cmd->fallthrough();
  add_common(sub_cmd, sub_bind);
  auto* lexicon_opt = sub_cmd->add_option("--lexicon", lexicon_path, "Replacement pool file");
  auto* train_opt = sub_cmd->add_option(
      "--train", train_path, "Corpus whose values must not appear as replacements");
  sub_bind.bind_string(lexicon_opt, "lexicon", &lexicon_path);
  sub_bind.bind_string(train_opt, "train", &train_path);
  sub_bind.require("lexicon");
  add_globals(sub_bind);

  // eval
  std::string predictions_path;
  double threshold = 0.9;
  std::string mode_name = "partial";
  bool per_turn = false;
  Bindings eval_bind;
  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against the corpus");
  eval_cmd->fallthrough();
  add_common(eval_cmd, eval_bind);
  auto* pred_opt = eval_cmd->add_option("--predictions", predictions_path, "Prediction file");
  auto* thr_opt = eval_cmd->add_option("--threshold", threshold,
                                       "Fuzzy match threshold in (0, 1]");
  auto* mode_opt = eval_cmd->add_option("--mode", mode_name, "Fuzzy mode: full or partial");
  auto* per_turn_opt =
      eval_cmd->add_flag("--per-turn", per_turn, "Also write a per-turn score table");
  eval_bind.bind_string(pred_opt, "predictions", &predictions_path);
  eval_bind.bind_double(thr_opt, "threshold", &threshold);
  eval_bind.bind_string(mode_opt, "mode", &mode_name);
  eval_bind.bind_bool(per_turn_opt, "per-turn", &per_turn);
  eval_bind.require("predictions");
  add_globals(eval_bind);

  // verify
  std::string before_path, after_path, worksheet_path;
  std::size_t n_modified = 50, n_unchanged = 50;
  Bindings verify_bind;
  auto* verify_cmd =
      app.add_subcommand("verify", "Sample a labeling worksheet or score a filled one");
  verify_cmd->fallthrough();
  auto* before_opt = verify_cmd->add_option("--before", before_path, "Corpus before corrections");
  auto* after_opt = verify_cmd->add_option("--after", after_path, "Corpus after corrections");
  auto* mod_opt = verify_cmd->add_option("--modified", n_modified, "Modified dialogs to sample");
  auto* unmod_opt =
      verify_cmd->add_option("--unchanged", n_unchanged, "Unchanged dialogs to sample");
  auto* sheet_opt = verify_cmd->add_option("--worksheet", worksheet_path,
                                           "Filled worksheet to score (switches to score mode)");
  verify_bind.bind_string(before_opt, "before", &before_path);
  verify_bind.bind_string(after_opt, "after", &after_path);
  verify_bind.bind_size(mod_opt, "modified", &n_modified);
  verify_bind.bind_size(unmod_opt, "unchanged", &n_unchanged);
  verify_bind.bind_string(sheet_opt, "worksheet", &worksheet_path);
  add_globals(verify_bind);

  // report
  std::vector<std::string> stats_paths;
  std::string eval_a_dir, eval_b_dir, bias_path;
  Bindings report_bind;
  auto* report_cmd = app.add_subcommand("report", "Merge artifacts into one report");
  report_cmd->fallthrough();
  report_cmd->add_option("--stats", stats_paths, "Correction stats files to merge");
  auto* eval_a_opt = report_cmd->add_option("--eval-a", eval_a_dir,
                                            "Directory with a baseline eval's artifacts");
  auto* eval_b_opt = report_cmd->add_option("--eval-b", eval_b_dir,
                                            "Directory with a comparison eval's artifacts");
  auto* bias_in_opt = report_cmd->add_option("--bias", bias_path, "Bias table to include");
  report_bind.bind_string(eval_a_opt, "eval-a", &eval_a_dir);
  report_bind.bind_string(eval_b_opt, "eval-b", &eval_b_dir);
  report_bind.bind_string(bias_in_opt, "bias", &bias_path);
  add_globals(report_bind);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitClean : kExitError;
  }

  try {
    if (config_path.empty()) {
      if (const char* env = std::getenv("DSTDOCTOR_CONFIG")) config_path = env;
    }
    std::map<std::string, std::string> config;
    if (!config_path.empty()) config = load_config_file(config_path);

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    Bindings* bind = nullptr;
    if (sub == check_cmd) bind = &check_bind;
    else if (sub == fix_cmd) bind = &fix_bind;
    else if (sub == bias_cmd) bind = &bias_bind;
    else if (sub == sub_cmd) bind = &sub_bind;
    else if (sub == eval_cmd) bind = &eval_bind;
    else if (sub == verify_cmd) bind = &verify_bind;
    else bind = &report_bind;
    bind->apply(config);

    fs::create_directories(out_dir);
    auto artifact = [&](const std::string& name) { return fs::path(out_dir) / name; };
    // Unknown keys are ignored on parse, so the version and count entries do
    // not disturb a --config replay of the manifest.
    auto finish = [&](int code, const std::map<std::string, std::uint64_t>& counts = {}) {
      std::string manifest = bind->manifest(command);
      manifest += "version " + std::string(kVersion) + "\n";
      for (const auto& [name, value] : counts)
        manifest += "count." + name + " " + std::to_string(value) + "\n";
      write_text(artifact(command + ".manifest"), manifest);
      return code;
    };

    if (sub == check_cmd || sub == fix_cmd) {
      LoadedInputs loaded = load_inputs(in, /*need_ontology=*/true);
      DetectionConfig detection = DetectionConfig::defaults();
      detection.norm = loaded.norm;
      MentionIndex index(loaded.ontology, loaded.database, detection);
      RuleSet rules = load_rules(rules_path);
      std::vector<CorrectionRecord> records =
          detect_corrections(loaded.corpus, rules, index, jobs);
      DetectionSummary summary = summarize(records);

      if (sub == check_cmd) {
        write_records(records, artifact("proposals.tsv"));
        std::cout << "proposals: " << records.size() << " (user " << summary.user << ", system "
                  << summary.system << "); dialogs affected: " << summary.dialogs.size() << "\n";
        return finish(records.empty() ? kExitClean : kExitFindings,
                      {{"proposals", records.size()},
                       {"proposals_user", summary.user},
                       {"proposals_system", summary.system},
                       {"dialogs", loaded.corpus.dialogs.size()}});
      }

      ApplyOutcome outcome = apply_corrections(loaded.corpus, std::move(records));
      std::size_t applied = 0, rejected = 0;
      for (const CorrectionRecord& record : outcome.records) {
        if (record.status == CorrectionStatus::applied) ++applied;
        if (record.status == CorrectionStatus::rejected) ++rejected;
      }
      CorrectionStats stats = correction_stats(loaded.corpus, outcome.corpus, outcome.records);
      write_corpus(outcome.corpus, artifact("corrected.corpus"));
      write_records(outcome.records, artifact("corrections.tsv"));
      write_stats(stats, artifact("stats.tsv"));
      write_text(artifact("stats_table.txt"), render_stats_table(stats));
      write_text(artifact("source_ratio.txt"), render_source_ratio_table(stats));
      std::cout << "applied " << applied << " corrections (" << rejected << " rejected) in "
                << summary.dialogs.size() << " dialogs\n";
      return finish(kExitClean, {{"applied", applied},
                                 {"rejected", rejected},
                                 {"dialogs", loaded.corpus.dialogs.size()}});
    }

    if (sub == bias_cmd) {
      LoadedInputs loaded = load_inputs(in, /*need_ontology=*/false);
      CountingPolicy policy = parse_counting_policy(policy_name);
      std::vector<BiasScore> scores = bias_report(loaded.corpus, policy, loaded.norm, jobs);
      write_bias_table(scores, policy, artifact("bias.tsv"));
      std::cout << "slots scored: " << scores.size() << "\n";
      auto fixed3 = [](double value) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", value);
        return std::string(buf);
      };
      for (std::size_t i = 0; i < scores.size() && i < 5; ++i) {
        const BiasScore& s = scores[i];
        std::cout << "  " << s.domain << "." << s.slot_type << ": shannon " << fixed3(s.shannon)
                  << ", min-entropy " << fixed3(s.min_entropy)
                  << (s.degenerate ? " (degenerate)" : "") << "\n";
      }
      return finish(kExitClean, {{"slots", scores.size()},
                                 {"dialogs", loaded.corpus.dialogs.size()}});
    }

    if (sub == sub_cmd) {
      LoadedInputs loaded = load_inputs(in, /*need_ontology=*/false);
      ReplacementLexicon lexicon = load_lexicon(lexicon_path, loaded.norm);
      SubstituteConfig config;
      config.norm = loaded.norm;
      config.seed = seed;
      SeenValues seen;
      if (!train_path.empty()) {
        LoadOptions options;
        options.format = parse_corpus_format(in.format);
        options.multi_value = in.multi_value;
        options.default_split = "train";
        Diagnostics diags;
        Corpus train = load_corpus(train_path, options, &diags);
        print_diagnostics(diags);
        seen = collect_seen_values(train, config.norm);
      } else {
        seen = collect_seen_values(loaded.corpus, config.norm);
      }
      Diagnostics diags;
      ReplacementMap map = build_replacement_map(loaded.corpus, lexicon, seen, config, &diags);
      print_diagnostics(diags);
      Corpus substituted = apply_replacements(loaded.corpus, map, config);
      LeakageReport leakage = leakage_audit(substituted, lexicon, seen, config);

      std::size_t mapped = 0;
      for (const DialogPlan& plan : map.plans) mapped += plan.mapping.size();
      write_corpus(substituted, artifact("substituted.corpus"));
      write_replacement_map(map, artifact("replacement_map.tsv"));
      write_text(artifact("leakage.tsv"), render_leakage_report(leakage));
      std::cout << "replaced " << mapped << " values across " << map.plans.size()
                << " dialogs; leakage hits: " << leakage.hits.size() << "\n";
      return finish(kExitClean, {{"replaced", mapped},
                                 {"dialogs_with_plan", map.plans.size()},
                                 {"leakage_hits", leakage.hits.size()}});
    }

    if (sub == eval_cmd) {
      LoadedInputs loaded = load_inputs(in, /*need_ontology=*/true);
      LoadOptions options;
      options.multi_value = in.multi_value;
      PredictionSet predictions =
          load_predictions(predictions_path, loaded.corpus, &loaded.ontology, options);
      ScoreConfig config;
      config.fuzzy_threshold = threshold;
      config.mode = parse_fuzzy_mode(mode_name);
      config.norm = loaded.norm;
      std::vector<TurnScore> turns;
      EvalResult result = evaluate(loaded.corpus, predictions, loaded.ontology, config, jobs,
                                   per_turn ? &turns : nullptr);
      write_eval_result(result, artifact("eval_summary.tsv"), artifact("eval_per_slot.tsv"));
      if (per_turn) write_text(artifact("eval_per_turn.tsv"), render_eval_per_turn(turns));
      std::cout << render_eval_summary(result);
      return finish(kExitClean, {{"turns", result.turn_total},
                                 {"missing_prediction_turns", result.missing_prediction_turns}});
    }

    if (sub == verify_cmd) {
      if (!worksheet_path.empty()) {
        std::vector<WorksheetRow> rows = read_worksheet(worksheet_path);
        VerificationCounts counts = worksheet_counts(rows);
        VerificationMetrics metrics =
            verification_metrics(counts.tp, counts.fp, counts.fn, counts.tn);
        std::string report = render_verification_report(counts, metrics);
        write_text(artifact("verification.tsv"), report);
        std::cout << report;
        return finish(kExitClean, {{"tp", counts.tp},
                                   {"fp", counts.fp},
                                   {"fn", counts.fn},
                                   {"tn", counts.tn}});
      }
      if (before_path.empty() || after_path.empty())
        throw ValidationError("verify needs --before and --after (or --worksheet)");
      LoadOptions options;
      options.format = parse_corpus_format(in.format);
      options.multi_value = in.multi_value;
      Diagnostics diags;
      Corpus before = load_corpus(before_path, options, &diags);
      Corpus after = load_corpus(after_path, options, &diags);
      print_diagnostics(diags);
      std::vector<WorksheetRow> rows =
          sample_verification(before, after, n_modified, n_unchanged, seed);
      write_worksheet(rows, artifact("worksheet.tsv"));
      std::cout << "worksheet rows: " << rows.size() << " (fill the label column with"
                << " correct or incorrect)\n";
      return finish(kExitClean, {{"rows", rows.size()}});
    }

    // report
    std::string body;
    if (!stats_paths.empty()) {
      std::vector<CorrectionStats> parts;
      for (const std::string& path : stats_paths) parts.push_back(read_stats(path));
      CorrectionStats merged = merge_stats(parts);
      body += render_stats_table(merged);
      body += "\n";
      body += render_source_ratio_table(merged);
      body += "\n";
    }
    if (!eval_a_dir.empty() != !eval_b_dir.empty())
      throw ValidationError("report needs both --eval-a and --eval-b, or neither");
    if (!eval_a_dir.empty()) {
      EvalResult a = read_eval_result(fs::path(eval_a_dir) / "eval_summary.tsv",
                                      fs::path(eval_a_dir) / "eval_per_slot.tsv");
      EvalResult b = read_eval_result(fs::path(eval_b_dir) / "eval_summary.tsv",
                                      fs::path(eval_b_dir) / "eval_per_slot.tsv");
      body += render_eval_delta(compare_evals(a, b));
      body += "\n";
    }
    if (!bias_path.empty()) {
      std::ifstream bias_in(bias_path, std::ios::binary);
      if (!bias_in) throw ParseError("cannot open " + bias_path);
      read_bias_table(bias_path);  // shape check only, the table is included verbatim
      body += std::string(std::istreambuf_iterator<char>(bias_in), {});
      body += "\n";
    }
    if (body.empty())
      throw ValidationError("report needs at least one of --stats, --eval-a/--eval-b, --bias");
    write_text(artifact("report.txt"), body);
    std::cout << body;
    return finish(kExitClean);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
