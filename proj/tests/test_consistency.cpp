#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "dstdoctor/consistency.hpp"
#include "dstdoctor/corpus_io.hpp"
#include "helpers.hpp"

using namespace dstdoctor;

namespace {

Ontology hotel_ontology() {
  Ontology ontology;
  ontology.entries[{"hotel", "name"}] = {false,
                                         {"acorn guest house", "city centre north bed and breakfast",
                                          "red lion", "worth house"}};
  ontology.entries[{"hotel", "area"}] = {true, {"centre", "east", "north", "south", "west"}};
  ontology.entries[{"hotel", "type"}] = {true, {"guesthouse", "hotel", "lion inn"}};
  ontology.entries[{"hotel", "parking"}] = {true, {"free", "no", "yes"}};
  ontology.entries[{"hotel", "internet"}] = {true, {"free", "no", "yes"}};
  ontology.entries[{"hotel", "stars"}] = {true, {"0", "1", "2", "3", "4", "5"}};
  return ontology;
}

Dialog one_turn_dialog(std::string user, std::string system,
                       std::vector<SlotTriple> state = {}) {
  Dialog dialog;
  dialog.id = "d1";
  dialog.domains = {"hotel", "train"};
  DialogTurn turn;
  turn.index = 0;
  turn.user = std::move(user);
  turn.system = std::move(system);
  turn.state = std::move(state);
  std::sort(turn.state.begin(), turn.state.end());
  dialog.turns.push_back(std::move(turn));
  return dialog;
}

}  // namespace

TEST_CASE("mention index finds multi-token values with raw spans") {
  MentionIndex index(hotel_ontology(), {}, DetectionConfig::defaults());
  std::vector<std::string> domains = {"hotel"};
  std::string raw = "How about the Acorn Guest House?";
  auto matches = index.find_all(raw, domains);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].domain == "hotel");
  CHECK(matches[0].slot_type == "name");
  CHECK(matches[0].value == "acorn guest house");
  CHECK(raw.substr(matches[0].begin, matches[0].end - matches[0].begin) ==
        "Acorn Guest House");
}

TEST_CASE("mention index needs word boundaries, not substrings") {
  MentionIndex index(hotel_ontology(), {}, DetectionConfig::defaults());
  std::vector<std::string> domains = {"hotel"};
  // "north" inside "northampton" is not a token match.
  CHECK(index.find_all("going to northampton", domains).empty());
  CHECK(index.find_all("in the north please", domains).size() == 1);
}

TEST_CASE("mention index respects active domains") {
  Ontology ontology = hotel_ontology();
  ontology.entries[{"restaurant", "area"}] = {true, {"centre", "north"}};
  MentionIndex index(ontology, {}, DetectionConfig::defaults());

  std::vector<std::string> hotel_only = {"hotel"};
  auto matches = index.find_all("somewhere in the north", hotel_only);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].domain == "hotel");

  std::vector<std::string> both = {"hotel", "restaurant"};
  CHECK(index.find_all("somewhere in the north", both).size() == 2);
}

TEST_CASE("stoplisted and too-short values never match") {
  DetectionConfig config = DetectionConfig::defaults();
  MentionIndex index(hotel_ontology(), {}, config);
  std::vector<std::string> domains = {"hotel"};
  // "yes" is a hotel.parking value but stoplisted; "4" is below min chars.
  CHECK(index.find_all("yes please", domains).empty());
  CHECK(index.find_all("4 stars", domains).empty());
}

TEST_CASE("database vocabulary extends the ontology for declared slots") {
  EntityDatabase db;
  db.records["hotel"].push_back({{"name", "alpha milton guest house"}, {"owner", "nobody"}});
  MentionIndex index(hotel_ontology(), db, DetectionConfig::defaults());
  std::vector<std::string> domains = {"hotel"};

  auto matches = index.find_all("what about the alpha milton guest house", domains);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].slot_type == "name");
  CHECK(matches[0].value == "alpha milton guest house");
  // "owner" is not an ontology slot, so its values add nothing.
  CHECK(index.find_all("ask the nobody desk", domains).empty());
}

TEST_CASE("synonym variants match and report the canonical value") {
  DetectionConfig config = DetectionConfig::defaults();
  config.norm.synonyms[{"hotel", "type"}]["guest house"] = "guesthouse";
  MentionIndex index(hotel_ontology(), {}, config);
  std::vector<std::string> domains = {"hotel"};

  auto matches = index.find_all("i want a guest house", domains);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].value == "guesthouse");
  CHECK(matches[0].token_count == 2);
}

TEST_CASE("ambiguous same-span values are dropped entirely") {
  SUBCASE("station names shared by departure and destination") {
    Ontology ontology;
    ontology.entries[{"train", "departure"}] = {false, {"cambridge", "ely"}};
    ontology.entries[{"train", "destination"}] = {false, {"cambridge", "ely"}};
    Dialog dialog = one_turn_dialog("i will leave from cambridge", "when?");
    auto candidates = detect_mentions(dialog, ontology, {}, DetectionConfig::defaults());
    CHECK(candidates.empty());
  }
  SUBCASE("free is evidence for neither parking nor internet") {
    Dialog dialog = one_turn_dialog("does it have free wifi", "it does");
    auto candidates = detect_mentions(dialog, hotel_ontology(), {}, DetectionConfig::defaults());
    CHECK(candidates.empty());
  }
  SUBCASE("unambiguous values still match alongside dropped ones") {
    Ontology ontology;
    ontology.entries[{"train", "departure"}] = {false, {"cambridge", "ely"}};
    ontology.entries[{"train", "destination"}] = {false, {"cambridge", "ely"}};
    ontology.entries[{"train", "day"}] = {true, {"monday", "tuesday"}};
    Dialog dialog = one_turn_dialog("from cambridge on monday", "ok");
    auto candidates = detect_mentions(dialog, ontology, {}, DetectionConfig::defaults());
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].slot_type == "day");
    CHECK(candidates[0].value == "monday");
  }
}

TEST_CASE("overlaps resolve longest first, then by slot priority") {
  MentionIndex index(hotel_ontology(), {}, DetectionConfig::defaults());
  std::vector<std::string> domains = {"hotel"};

  SUBCASE("longer span beats the shorter ones inside it") {
    Dialog dialog =
        one_turn_dialog("the city centre north bed and breakfast is nice", "indeed");
    auto candidates = detect_mentions(dialog, index);
    // One user-side hit; "centre" and "north" are swallowed by the name.
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].slot_type == "name");
    CHECK(candidates[0].value == "city centre north bed and breakfast");
    CHECK(candidates[0].side == Side::user);
  }
  SUBCASE("equal-length overlap goes to the higher-priority slot type") {
    // "red lion inn": hotel.name "red lion" and hotel.type "lion inn" both
    // span two tokens and eight bytes; name outranks type.
    Dialog dialog = one_turn_dialog("book the red lion inn", "sure");
    auto candidates = detect_mentions(dialog, index);
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].slot_type == "name");
    CHECK(candidates[0].value == "red lion");
  }
}

TEST_CASE("detect_mentions reports both sides of every turn") {
  MentionIndex index(hotel_ontology(), {}, DetectionConfig::defaults());
  Dialog dialog = one_turn_dialog("i want the worth house", "worth house is in the north");
  auto candidates = detect_mentions(dialog, index);
  REQUIRE(candidates.size() == 3);
  CHECK(candidates[0].side == Side::user);
  int system_count = 0;
  for (const auto& c : candidates)
    if (c.side == Side::system) ++system_count;
  CHECK(system_count == 2);  // name and area both sit on the system side
}

TEST_CASE("priority rank falls back past the configured list") {
  DetectionConfig config = DetectionConfig::defaults();
  MentionIndex index(hotel_ontology(), {}, config);
  CHECK(index.priority_rank("name") == 0);
  CHECK(index.priority_rank("destination") < index.priority_rank("departure"));
  CHECK(index.priority_rank("nonexistent") == config.slot_priority.size());
}

TEST_CASE("user pass proposes only unannotated slots") {
  MentionIndex index(hotel_ontology(), {}, DetectionConfig::defaults());

  SUBCASE("empty slot becomes a proposal") {
    Dialog dialog = one_turn_dialog("a place in the north", "sure");
    auto records = detect_missing_user_annotations(dialog, index);
    REQUIRE(records.size() == 1);
    CHECK(records[0].added == SlotTriple{"hotel", "area", "north"});
    CHECK(records[0].side == Side::user);
    CHECK(records[0].rule_id == kUserMentionRule);
    CHECK(records[0].status == CorrectionStatus::proposed);
    CHECK(records[0].turn == 0);
  }
  SUBCASE("slot already holding the value is left alone") {
    Dialog dialog =
        one_turn_dialog("a place in the north", "sure", {{"hotel", "area", "north"}});
    CHECK(detect_missing_user_annotations(dialog, index).empty());
  }
  SUBCASE("slot holding a different value is left alone by default") {
    Dialog dialog =
        one_turn_dialog("a place in the north", "sure", {{"hotel", "area", "south"}});
    CHECK(detect_missing_user_annotations(dialog, index).empty());
  }
  SUBCASE("propose_overwrites opts in to replacements") {
    DetectionConfig config = DetectionConfig::defaults();
    config.propose_overwrites = true;
    MentionIndex overwriting(hotel_ontology(), {}, config);
    Dialog dialog =
        one_turn_dialog("a place in the north", "sure", {{"hotel", "area", "south"}});
    auto records = detect_missing_user_annotations(dialog, overwriting);
    REQUIRE(records.size() == 1);
    CHECK(records[0].added == SlotTriple{"hotel", "area", "north"});
  }
}

TEST_CASE("a proposal suppresses repeats on later turns") {
  MentionIndex index(hotel_ontology(), {}, DetectionConfig::defaults());
  Dialog dialog;
  dialog.id = "d1";
  dialog.domains = {"hotel"};
  DialogTurn t0, t1;
  t0.index = 0;
  t0.user = "a place in the north";
  t0.system = "how about worth house?";
  t1.index = 1;
  t1.user = "the north is ideal";
  t1.system = "noted";
  dialog.turns = {t0, t1};

  auto records = detect_missing_user_annotations(dialog, index);
  REQUIRE(records.size() == 1);
  CHECK(records[0].turn == 0);
}

TEST_CASE("rule set validation") {
  auto rule = [](std::string id) {
    CorrectionRule r;
    r.rule_id = std::move(id);
    r.domain = "hotel";
    r.slot_type = "name";
    r.trigger = "\\b{value}\\b";
    return r;
  };

  CHECK_NOTHROW(RuleSet({rule("ok_rule-1")}));

  SUBCASE("duplicate ids") {
    CHECK_THROWS_AS(RuleSet({rule("dup"), rule("dup")}), ValidationError);
  }
  SUBCASE("bad id characters") {
    CHECK_THROWS_AS(RuleSet({rule("Bad Id")}), ValidationError);
    CHECK_THROWS_AS(RuleSet({rule("")}), ValidationError);
  }
  SUBCASE("reserved user-mention id") {
    CHECK_THROWS_AS(RuleSet({rule(kUserMentionRule)}), ValidationError);
  }
  SUBCASE("placeholder count must be exactly one") {
    CorrectionRule none = rule("none");
    none.trigger = "\\boffer\\b";
    CHECK_THROWS_AS(RuleSet({none}), ValidationError);
    CorrectionRule twice = rule("twice");
    twice.trigger = "{value}.*{value}";
    CHECK_THROWS_AS(RuleSet({twice}), ValidationError);
  }
  SUBCASE("broken reject regex") {
    CorrectionRule broken = rule("broken");
    broken.reject = {"(unclosed"};
    CHECK_THROWS_AS(RuleSet({broken}), ValidationError);
  }
}

TEST_CASE("rule matching over the system and reply pair") {
  CorrectionRule offer;
  offer.rule_id = "offer";
  offer.domain = "hotel";
  offer.slot_type = "name";
  offer.trigger = "\\b{value}\\b[^\\n]*\\n[^\\n]*\\byes\\b";
  offer.reject = {"\\bno\\b", "\\bdifferent\\b"};
  RuleSet rules({offer});
  SlotKey key{"hotel", "name"};

  SUBCASE("cue in the reply fires the rule") {
    const CorrectionRule* hit =
        rules.match(key, "worth house", "how about worth house", "yes please");
    REQUIRE(hit != nullptr);
    CHECK(hit->rule_id == "offer");
  }
  SUBCASE("no cue, no match") {
    CHECK(rules.match(key, "worth house", "how about worth house", "how many stars") ==
          nullptr);
  }
  SUBCASE("reject vetoes on the reply") {
    CHECK(rules.match(key, "worth house", "how about worth house",
                      "yes but somewhere different") == nullptr);
  }
  SUBCASE("reject patterns never look at the system line") {
    // "no" sits in the system text only; the veto tests the reply alone.
    const CorrectionRule* hit =
        rules.match(key, "worth house", "there is no better place than worth house",
                    "yes please");
    CHECK(hit != nullptr);
  }
  SUBCASE("value must sit on the system line") {
    CHECK(rules.match(key, "worth house", "we have many options", "worth house yes") ==
          nullptr);
  }
  SUBCASE("slot filter applies") {
    CHECK(rules.match({"hotel", "area"}, "north", "north it is", "yes") == nullptr);
  }
  SUBCASE("regex metacharacters in values are literal") {
    CHECK(rules.match(key, "w.rth house", "how about worth house", "yes") == nullptr);
  }
}

TEST_CASE("dot in a trigger does not cross the line break") {
  CorrectionRule rule;
  rule.rule_id = "dotted";
  rule.domain = "*";
  rule.slot_type = "*";
  rule.trigger = "{value}.*confirmed";
  RuleSet rules({rule});
  // "confirmed" only in the reply: '.' cannot reach across '\n'.
  CHECK(rules.match({"hotel", "name"}, "worth house", "worth house offered", "confirmed") ==
        nullptr);
  CHECK(rules.match({"hotel", "name"}, "worth house", "worth house confirmed today",
                    "anything") != nullptr);
}

TEST_CASE("wildcard rules apply to every slot") {
  CorrectionRule any;
  any.rule_id = "any";
  any.domain = "*";
  any.slot_type = "*";
  any.trigger = "\\b{value}\\b";
  RuleSet rules({any});
  CHECK(rules.match({"hotel", "name"}, "x1", "x1 here", "") != nullptr);
  CHECK(rules.match({"train", "day"}, "monday", "monday works", "") != nullptr);
}

TEST_CASE("user-side rules load but the matcher skips them") {
  CorrectionRule user_rule;
  user_rule.rule_id = "user_side";
  user_rule.domain = "*";
  user_rule.slot_type = "*";
  user_rule.side = Side::user;
  user_rule.trigger = "\\b{value}\\b";
  RuleSet rules({user_rule});
  CHECK(rules.rules().size() == 1);
  CHECK(rules.match({"hotel", "name"}, "worth house", "worth house", "worth house") ==
        nullptr);
}

TEST_CASE("rules file parsing") {
  testutil::TempDir tmp;
  SUBCASE("the shipped default rules load") {
    RuleSet rules = load_rules(testutil::rules_path("default.rules"));
    CHECK(rules.rules().size() == 18);
  }
  SUBCASE("rule without a slot line") {
    testutil::write_file(tmp.file("r1"), "rule a\ntrigger {value}\nend\n");
    CHECK_THROWS_AS(load_rules(tmp.file("r1")), ParseError);
  }
  SUBCASE("rule without a trigger") {
    testutil::write_file(tmp.file("r2"), "rule a\nslot hotel.name\nend\n");
    CHECK_THROWS_AS(load_rules(tmp.file("r2")), ParseError);
  }
  SUBCASE("line outside a rule block") {
    testutil::write_file(tmp.file("r3"), "slot hotel.name\n");
    CHECK_THROWS_AS(load_rules(tmp.file("r3")), ParseError);
  }
  SUBCASE("unterminated block") {
    testutil::write_file(tmp.file("r4"), "rule a\nslot hotel.name\ntrigger {value}\n");
    CHECK_THROWS_AS(load_rules(tmp.file("r4")), ParseError);
  }
  SUBCASE("validation failures surface as parse errors with the file name") {
    testutil::write_file(tmp.file("r5"),
                         "rule user-mention\nslot hotel.name\ntrigger {value}\nend\n");
    CHECK_THROWS_AS(load_rules(tmp.file("r5")), ParseError);
  }
}

TEST_CASE("system pass on the annotated and unannotated twins") {
  Corpus corpus = load_corpus(testutil::data_path("twin.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));
  EntityDatabase database = load_database(testutil::data_path("test.database"));
  RuleSet rules = load_rules(testutil::rules_path("default.rules"));
  DetectionConfig config = DetectionConfig::defaults();
  config.norm = load_synonyms(testutil::data_path("test.synonyms"), config.norm);
  MentionIndex index(ontology, database, config);

  auto records = detect_corrections(corpus, rules, index);
  REQUIRE(records.size() == 1);
  CHECK(records[0].dialog_id == "attr0001_a");
  CHECK(records[0].turn == 1);
  CHECK(records[0].added == SlotTriple{"attraction", "name", "all saints church"});
  CHECK(records[0].side == Side::system);
  CHECK(records[0].rule_id == "attraction_name_offer");

  SUBCASE("applying the proposal reaches the annotated twin's states") {
    ApplyOutcome outcome = apply_corrections(corpus, records);
    REQUIRE(outcome.records.size() == 1);
    CHECK(outcome.records[0].status == CorrectionStatus::applied);
    const Dialog* fixed = outcome.corpus.find("attr0001_a");
    const Dialog* reference = outcome.corpus.find("attr0001_b");
    REQUIRE(fixed != nullptr);
    REQUIRE(reference != nullptr);
    CHECK(testutil::turn_states(*fixed) == testutil::turn_states(*reference));

    // Idempotence: a second detection pass proposes nothing.
    CHECK(detect_corrections(outcome.corpus, rules, index).empty());
  }
}

TEST_CASE("detection results are independent of the worker count") {
  Corpus corpus = load_corpus(testutil::data_path("seeded.corpus"));
  Ontology ontology = load_ontology(testutil::data_path("test.ontology"));
  EntityDatabase database = load_database(testutil::data_path("test.database"));
  RuleSet rules = load_rules(testutil::rules_path("default.rules"));
  DetectionConfig config = DetectionConfig::defaults();
  config.norm = load_synonyms(testutil::data_path("test.synonyms"), config.norm);
  MentionIndex index(ontology, database, config);

  auto seq = detect_corrections(corpus, rules, index, 1);
  auto par = detect_corrections(corpus, rules, index, 4);
  CHECK(seq == par);
  CHECK(seq.size() == 17);
}

TEST_CASE("side and status names parse and render") {
  CHECK(parse_side("user") == Side::user);
  CHECK(parse_side("system") == Side::system);
  CHECK(to_string(Side::user) == "user");
  CHECK(to_string(Side::system) == "system");
  CHECK_THROWS_AS(parse_side("agent"), ParseError);

  for (CorrectionStatus status : {CorrectionStatus::proposed, CorrectionStatus::applied,
                                  CorrectionStatus::rejected}) {
    CHECK(parse_correction_status(to_string(status)) == status);
  }
  CHECK_THROWS_AS(parse_correction_status("pending"), ParseError);
}
