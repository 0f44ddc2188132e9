#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "dstdoctor/corpus_io.hpp"
#include "dstdoctor/evaluate.hpp"
#include "helpers.hpp"

using namespace dstdoctor;

namespace {

// Reference edit distance, full matrix. Slow but obviously correct.
std::size_t lev_reference(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1,
                                          std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t subst = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, subst});
    }
  }
  return d[a.size()][b.size()];
}

std::string random_word(std::mt19937_64& rng, std::size_t max_len) {
  std::string out;
  std::size_t len = rng() % (max_len + 1);
  for (std::size_t i = 0; i < len; ++i) out += static_cast<char>('a' + rng() % 6);
  return out;
}

}  // namespace

TEST_CASE("levenshtein hand-checked values") {
  CHECK(levenshtein("kitten", "sitting") == 3);
  CHECK(levenshtein("flaw", "lawn") == 2);
  CHECK(levenshtein("", "abc") == 3);
  CHECK(levenshtein("abc", "") == 3);
  CHECK(levenshtein("", "") == 0);
  CHECK(levenshtein("same", "same") == 0);
  CHECK(levenshtein("abcdef", "azced") == 3);
}

TEST_CASE("levenshtein matches the reference matrix on random pairs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    std::string a = random_word(rng, 16);
    std::string b = random_word(rng, 16);
    CHECK(levenshtein(a, b) == lev_reference(a, b));
  }
}

TEST_CASE("full similarity is one minus normalized distance") {
  CHECK(similarity("huntingdon marriott", "huntingdon marriott hotel", FuzzyMode::full) ==
        doctest::Approx(0.76).epsilon(1e-12));
  CHECK(similarity("abc", "abc", FuzzyMode::full) == 1.0);
  CHECK(similarity("abc", "xyz", FuzzyMode::full) == 0.0);
  CHECK(similarity("", "", FuzzyMode::full) == 1.0);
  CHECK(similarity("", "abcd", FuzzyMode::full) == 0.0);
}

TEST_CASE("partial similarity forgives containment") {
  CHECK(similarity("huntingdon marriott", "huntingdon marriott hotel", FuzzyMode::partial) ==
        1.0);
  CHECK(similarity("marriott", "the marriott hotel", FuzzyMode::partial) == 1.0);
  // Best window is "abfde": one substitution over length 5.
  CHECK(similarity("abcde", "xxabfdexx", FuzzyMode::partial) ==
        doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("similarity normalizes before comparing") {
  CHECK(similarity("Huntingdon  Marriott!", "huntingdon marriott", FuzzyMode::full) == 1.0);
}

TEST_CASE("similarity is symmetric, bounded, and 1.0 iff equal in full mode") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    std::string a = random_word(rng, 12);
    std::string b = random_word(rng, 12);
    for (FuzzyMode mode : {FuzzyMode::full, FuzzyMode::partial}) {
      double ab = similarity(a, b, mode);
      double ba = similarity(b, a, mode);
      CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
      CHECK(ab >= 0.0);
      CHECK(ab <= 1.0);
    }
    bool equal_normalized = a == b;
    CHECK((similarity(a, b, FuzzyMode::full) == 1.0) == equal_normalized);
    // Equal lengths collapse partial onto full (the only window is the
    // whole string); containment makes partial exactly 1.
    if (a.size() == b.size()) {
      CHECK(similarity(a, b, FuzzyMode::partial) ==
            doctest::Approx(similarity(a, b, FuzzyMode::full)).epsilon(1e-12));
    }
    if (!a.empty()) {
      CHECK(similarity(a, b + a + b, FuzzyMode::partial) == 1.0);
    }
  }
}

TEST_CASE("score_turn classifies each slot") {
  ScoreConfig config;
  std::vector<SlotTriple> gold = {{"hotel", "area", "north"},
                                  {"hotel", "name", "worth house"},
                                  {"hotel", "stars", "4"}};
  std::vector<SlotTriple> pred = {{"hotel", "area", "north"},
                                  {"hotel", "name", "acorn guest house"},
                                  {"hotel", "parking", "yes"}};
  TurnScore score = score_turn(gold, pred, config);
  CHECK(score.slots.at({"hotel", "area"}) == SlotOutcome::correct);
  CHECK(score.slots.at({"hotel", "name"}) == SlotOutcome::wrong_value);
  CHECK(score.slots.at({"hotel", "stars"}) == SlotOutcome::missing);
  CHECK(score.slots.at({"hotel", "parking"}) == SlotOutcome::spurious);
  CHECK_FALSE(score.exact_joint);
  CHECK_FALSE(score.fuzzy_joint);
}

TEST_CASE("score_turn exact and fuzzy joints") {
  ScoreConfig config;
  config.fuzzy_threshold = 0.9;
  config.mode = FuzzyMode::partial;

  SUBCASE("identical states are exact and fuzzy") {
    std::vector<SlotTriple> state = {{"hotel", "area", "north"}};
    TurnScore score = score_turn(state, state, config);
    CHECK(score.exact_joint);
    CHECK(score.fuzzy_joint);
  }
  SUBCASE("near-miss value is fuzzy only") {
    std::vector<SlotTriple> gold = {{"attraction", "name", "all saints church"}};
    std::vector<SlotTriple> pred = {{"attraction", "name", "all saints churc"}};
    TurnScore score = score_turn(gold, pred, config);
    CHECK_FALSE(score.exact_joint);
    CHECK(score.fuzzy_joint);
  }
  SUBCASE("fuzzy still requires identical slot key sets") {
    std::vector<SlotTriple> gold = {{"hotel", "area", "north"}, {"hotel", "stars", "4"}};
    std::vector<SlotTriple> pred = {{"hotel", "area", "north"}};
    TurnScore score = score_turn(gold, pred, config);
    CHECK_FALSE(score.fuzzy_joint);

    std::vector<SlotTriple> extra = {{"hotel", "area", "north"},
                                     {"hotel", "stars", "4"},
                                     {"hotel", "parking", "yes"}};
    CHECK_FALSE(score_turn(gold, extra, config).fuzzy_joint);
  }
  SUBCASE("empty against empty is a correct joint") {
    TurnScore score = score_turn({}, {}, config);
    CHECK(score.exact_joint);
    CHECK(score.fuzzy_joint);
    CHECK(score.slots.empty());
  }
  SUBCASE("multi-value gold accepts any stored alternative") {
    std::vector<SlotTriple> gold = {{"train", "destination", "cambridge"},
                                    {"train", "destination", "ely"}};
    std::vector<SlotTriple> pred = {{"train", "destination", "ely"}};
    TurnScore score = score_turn(gold, pred, config);
    CHECK(score.slots.at({"train", "destination"}) == SlotOutcome::correct);
  }
}

TEST_CASE("score_turn rejects thresholds outside (0, 1]") {
  ScoreConfig config;
  config.fuzzy_threshold = 0.0;
  CHECK_THROWS_AS(score_turn({}, {}, config), ValidationError);
  config.fuzzy_threshold = 1.5;
  CHECK_THROWS_AS(score_turn({}, {}, config), ValidationError);
  config.fuzzy_threshold = 1.0;
  CHECK_NOTHROW(score_turn({}, {}, config));
}

TEST_CASE("exact joint implies fuzzy joint on random states") {
  ScoreConfig config;
  std::mt19937_64 rng(2024);
  const char* domains[] = {"hotel", "train"};
  const char* slots[] = {"area", "name", "day"};
  for (int trial = 0; trial < 200; ++trial) {
    auto random_state = [&] {
      std::vector<SlotTriple> state;
      std::size_t n = rng() % 4;
      for (std::size_t i = 0; i < n; ++i) {
        SlotTriple t{domains[rng() % 2], slots[rng() % 3], random_word(rng, 6)};
        bool dup = false;
        for (const SlotTriple& prev : state)
          if (prev.key() == t.key()) dup = true;
        if (!dup && !t.value.empty()) state.push_back(std::move(t));
      }
      return state;
    };
    std::vector<SlotTriple> gold = random_state();
    std::vector<SlotTriple> pred = rng() % 2 ? gold : random_state();
    TurnScore score = score_turn(gold, pred, config);
    if (score.exact_joint) CHECK(score.fuzzy_joint);
  }
}

TEST_CASE("evaluate on the twin fixture") {
  Corpus gold = load_corpus(testutil::data_path("twin.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));
  PredictionSet preds =
      load_predictions(testutil::data_path("twin.predictions"), gold, &ontology);

  ScoreConfig config;
  std::vector<TurnScore> turns;
  EvalResult result = evaluate(gold, preds, ontology, config, 1, &turns);

  CHECK(result.turn_total == 4);
  CHECK(result.missing_prediction_turns == 0);
  CHECK(result.jga == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(result.fuzzy_jga == doctest::Approx(0.5).epsilon(1e-12));
  // One slot error per wrong turn with 23 ontology slots in scope.
  CHECK(result.slot_accuracy == doctest::Approx(89.0 / 92.0).epsilon(1e-12));

  REQUIRE(turns.size() == 4);
  std::sort(turns.begin(), turns.end(), [](const TurnScore& a, const TurnScore& b) {
    return std::tie(a.dialog_id, a.turn) < std::tie(b.dialog_id, b.turn);
  });
  CHECK(turns[0].exact_joint);        // a/0 exact
  CHECK_FALSE(turns[1].exact_joint);  // a/1 spurious name
  CHECK_FALSE(turns[1].fuzzy_joint);
  CHECK_FALSE(turns[2].exact_joint);  // b/0 wrong area
  CHECK_FALSE(turns[2].fuzzy_joint);
  CHECK_FALSE(turns[3].exact_joint);  // b/1 name typo
  CHECK(turns[3].fuzzy_joint);
}

TEST_CASE("missing predictions score as empty states") {
  Corpus gold = load_corpus(testutil::data_path("twin.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));
  PredictionSet preds;
  preds.entries[{"attr0001_a", 0}] = {{"attraction", "area", "centre"},
                                      {"attraction", "type", "architecture"}};

  EvalResult result = evaluate(gold, preds, ontology, {});
  CHECK(result.turn_total == 4);
  CHECK(result.missing_prediction_turns == 3);
  CHECK(result.jga == doctest::Approx(0.25).epsilon(1e-12));
  // The three unscored turns each miss two or three gold slots.
  CHECK(result.error_fraction({"attraction", "area"}) ==
        doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("evaluate validates predictions and gold against the ontology") {
  Corpus gold = load_corpus(testutil::data_path("twin.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));

  SUBCASE("unknown dialog") {
    PredictionSet preds;
    preds.entries[{"ghost", 0}] = {};
    CHECK_THROWS_AS(evaluate(gold, preds, ontology, {}), ValidationError);
  }
  SUBCASE("unknown turn") {
    PredictionSet preds;
    preds.entries[{"attr0001_a", 5}] = {};
    CHECK_THROWS_AS(evaluate(gold, preds, ontology, {}), ValidationError);
  }
  SUBCASE("slot outside the ontology") {
    PredictionSet preds;
    preds.entries[{"attr0001_a", 0}] = {{"taxi", "colour", "red"}};
    CHECK_THROWS_AS(evaluate(gold, preds, ontology, {}), ValidationError);
  }
}

TEST_CASE("evaluation is independent of the worker count") {
  Corpus gold = load_corpus(testutil::data_path("seeded.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));
  // Perfect predictions everywhere except one dialog left unpredicted.
  PredictionSet preds;
  for (const Dialog& dialog : gold.dialogs) {
    if (dialog.id == "seed0001") continue;
    for (const DialogTurn& turn : dialog.turns)
      preds.entries[{dialog.id, turn.index}] = turn.state;
  }

  std::vector<TurnScore> turns1, turns4;
  EvalResult r1 = evaluate(gold, preds, ontology, {}, 1, &turns1);
  EvalResult r4 = evaluate(gold, preds, ontology, {}, 4, &turns4);
  CHECK(r1.jga == r4.jga);
  CHECK(r1.fuzzy_jga == r4.fuzzy_jga);
  CHECK(r1.slot_accuracy == r4.slot_accuracy);
  CHECK(r1.missing_prediction_turns == r4.missing_prediction_turns);
  CHECK(r1.error_turn_counts == r4.error_turn_counts);
  CHECK(render_eval_per_turn(turns1) == render_eval_per_turn(turns4));
}

TEST_CASE("compare_evals requires a shared slot universe") {
  EvalResult a, b;
  a.error_turn_counts[{"hotel", "area"}] = 2;
  a.in_scope_turns[{"hotel", "area"}] = 10;
  b = a;

  SUBCASE("shared universe yields one row per slot") {
    b.error_turn_counts[{"hotel", "area"}] = 5;
    a.jga = 0.5;
    b.jga = 0.75;
    EvalDelta delta = compare_evals(a, b);
    CHECK(delta.jga_delta == doctest::Approx(0.25).epsilon(1e-12));
    REQUIRE(delta.rows.size() == 1);
    CHECK(delta.rows[0].errors_a == 2);
    CHECK(delta.rows[0].errors_b == 5);
    CHECK(delta.rows[0].delta == 3);
  }
  SUBCASE("extra slot on either side throws") {
    b.error_turn_counts[{"train", "day"}] = 0;
    CHECK_THROWS_AS(compare_evals(a, b), ValidationError);
    CHECK_THROWS_AS(compare_evals(b, a), ValidationError);
  }
}

TEST_CASE("eval results round trip through summary and per-slot files") {
  Corpus gold = load_corpus(testutil::data_path("twin.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));
  PredictionSet preds =
      load_predictions(testutil::data_path("twin.predictions"), gold, &ontology);
  EvalResult result = evaluate(gold, preds, ontology, {});

  testutil::TempDir tmp;
  write_eval_result(result, tmp.file("summary.tsv"), tmp.file("per_slot.tsv"));
  EvalResult reread = read_eval_result(tmp.file("summary.tsv"), tmp.file("per_slot.tsv"));

  CHECK(reread.turn_total == result.turn_total);
  CHECK(reread.missing_prediction_turns == result.missing_prediction_turns);
  CHECK(reread.mode == result.mode);
  CHECK(reread.error_turn_counts == result.error_turn_counts);
  CHECK(reread.in_scope_turns == result.in_scope_turns);
  // Ratios were written at six decimals.
  CHECK(reread.jga == doctest::Approx(result.jga).epsilon(1e-6));
  CHECK(reread.fuzzy_jga == doctest::Approx(result.fuzzy_jga).epsilon(1e-6));
  CHECK(reread.slot_accuracy == doctest::Approx(result.slot_accuracy).epsilon(1e-6));
}

TEST_CASE("fuzzy mode names parse and render") {
  CHECK(parse_fuzzy_mode("full") == FuzzyMode::full);
  CHECK(parse_fuzzy_mode("partial") == FuzzyMode::partial);
  CHECK(to_string(FuzzyMode::full) == "full");
  CHECK(to_string(FuzzyMode::partial) == "partial");
  CHECK_THROWS_AS(parse_fuzzy_mode("loose"), ParseError);
}
