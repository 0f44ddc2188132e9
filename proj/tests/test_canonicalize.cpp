#include <doctest.h>

#include <random>
#include <string>

#include "dstdoctor/canonicalize.hpp"
#include "dstdoctor/diagnostics.hpp"
#include "dstdoctor/model.hpp"
#include "helpers.hpp"

using namespace dstdoctor;

TEST_CASE("normalize lowercases, strips punctuation, collapses whitespace") {
  NormalizationConfig config;
  CHECK(normalize_text("Hello,  World!", config) == "hello world");
  CHECK(normalize_text("  leading and trailing  ", config) == "leading and trailing");
  CHECK(normalize_text("a\tb\nc", config) == "a b c");
  CHECK(normalize_text("don't", config) == "don't");
  CHECK(normalize_text("08:15", config) == "08 15");
  CHECK(normalize_text("", config).empty());
  CHECK(normalize_text(" . , ! ", config).empty());
}

TEST_CASE("normalize is idempotent on random ascii strings") {
  NormalizationConfig config;
  std::mt19937_64 rng(42);
  for (int i = 0; i < 500; ++i) {
    std::string raw;
    std::size_t len = rng() % 40;
    for (std::size_t j = 0; j < len; ++j) raw += static_cast<char>(32 + rng() % 95);
    std::string once = normalize_text(raw, config);
    CHECK(normalize_text(once, config) == once);
  }
}

TEST_CASE("normalize options can be disabled") {
  NormalizationConfig config;
  config.lowercase = false;
  config.strip_punctuation.clear();
  config.collapse_whitespace = false;
  CHECK(normalize_text("Hello,  World!", config) == "Hello,  World!");
}

TEST_CASE("diacritic stripping maps accented latin-1 to ascii") {
  NormalizationConfig config;
  config.strip_diacritics = true;
  CHECK(normalize_text("caf\xc3\xa9", config) == "cafe");
  CHECK(normalize_text("\xc3\x89l\xc3\xa8ve", config) == "eleve");
  // Off by default: the bytes pass through untouched.
  NormalizationConfig plain;
  CHECK(normalize_text("caf\xc3\xa9", plain) == "caf\xc3\xa9");
}

TEST_CASE("source maps recover raw byte spans") {
  NormalizationConfig config;
  std::string raw = "  The  Worth House. ";
  NormalizedText norm = normalize_with_map(raw, config);
  CHECK(norm.text == "the worth house");
  REQUIRE(norm.source.size() == norm.text.size());
  REQUIRE(norm.source_end.size() == norm.text.size());

  auto tokens = tokenize(norm);
  REQUIRE(tokens.size() == 3);
  CHECK(raw.substr(tokens[0].raw_begin, tokens[0].raw_end - tokens[0].raw_begin) == "The");
  CHECK(raw.substr(tokens[1].raw_begin, tokens[1].raw_end - tokens[1].raw_begin) == "Worth");
  CHECK(raw.substr(tokens[2].raw_begin, tokens[2].raw_end - tokens[2].raw_begin) == "House");
}

TEST_CASE("source maps stay aligned when diacritics shrink bytes") {
  NormalizationConfig config;
  config.strip_diacritics = true;
  std::string raw = "caf\xc3\xa9 bar";
  NormalizedText norm = normalize_with_map(raw, config);
  CHECK(norm.text == "cafe bar");
  auto tokens = tokenize(norm);
  REQUIRE(tokens.size() == 2);
  CHECK(raw.substr(tokens[0].raw_begin, tokens[0].raw_end - tokens[0].raw_begin) == "caf\xc3\xa9");
  CHECK(raw.substr(tokens[1].raw_begin, tokens[1].raw_end - tokens[1].raw_begin) == "bar");
}

TEST_CASE("tokenize reports normalized offsets") {
  NormalizationConfig config;
  NormalizedText norm = normalize_with_map("one two  three", config);
  auto tokens = tokenize(norm);
  REQUIRE(tokens.size() == 3);
  CHECK(norm.text.substr(tokens[0].begin, tokens[0].end - tokens[0].begin) == "one");
  CHECK(norm.text.substr(tokens[1].begin, tokens[1].end - tokens[1].begin) == "two");
  CHECK(norm.text.substr(tokens[2].begin, tokens[2].end - tokens[2].begin) == "three");
}

namespace {

Ontology tiny_ontology() {
  Ontology ontology;
  OntologyEntry price;
  price.categorical = true;
  price.values = {"cheap", "expensive", "moderate"};
  ontology.entries[{"hotel", "pricerange"}] = price;
  OntologyEntry name;
  name.values = {"acorn guest house", "worth house"};
  ontology.entries[{"hotel", "name"}] = name;
  return ontology;
}

}  // namespace

TEST_CASE("canonical_value matches ontology members after normalization") {
  Ontology ontology = tiny_ontology();
  NormalizationConfig config;
  CHECK(canonical_value({"hotel", "pricerange"}, "Cheap!", ontology, config) == "cheap");
  CHECK(canonical_value({"hotel", "name"}, "  Worth   House ", ontology, config) ==
        "worth house");
  CHECK_FALSE(canonical_value({"hotel", "pricerange"}, "free", ontology, config).has_value());
  CHECK_THROWS_AS(canonical_value({"taxi", "name"}, "x", ontology, config), ValidationError);
}

TEST_CASE("canonical_value applies one synonym step") {
  Ontology ontology = tiny_ontology();
  NormalizationConfig config;
  config.synonyms[{"hotel", "pricerange"}]["inexpensive"] = "cheap";
  CHECK(canonical_value({"hotel", "pricerange"}, "Inexpensive", ontology, config) == "cheap");
  // The variant maps only under its own slot.
  CHECK_FALSE(canonical_value({"hotel", "name"}, "inexpensive", ontology, config).has_value());
}

TEST_CASE("load_synonyms parses the fixture table") {
  NormalizationConfig config = load_synonyms(testutil::data_path("test.synonyms"));
  REQUIRE(config.synonyms_for({"hotel", "pricerange"}) != nullptr);
  CHECK(config.synonyms_for({"hotel", "pricerange"})->at("inexpensive") == "cheap");
  CHECK(config.synonyms_for({"hotel", "type"})->at("guest house") == "guesthouse");
  CHECK(config.synonyms_for({"train", "destination"})->at("kings cross") ==
        "london kings cross");
}

TEST_CASE("load_synonyms rejects conflicting and chained variants") {
  testutil::TempDir tmp;
  SUBCASE("same variant, different targets") {
    testutil::write_file(tmp.file("bad.synonyms"),
                         "synonym hotel.pricerange\nmap low\tcheap\nmap low\tmoderate\nend\n");
    CHECK_THROWS_AS(load_synonyms(tmp.file("bad.synonyms")), ParseError);
  }
  SUBCASE("target is itself a variant") {
    testutil::write_file(tmp.file("chain.synonyms"),
                         "synonym hotel.pricerange\nmap low\tcheap\nmap cheap\tmoderate\nend\n");
    CHECK_THROWS_AS(load_synonyms(tmp.file("chain.synonyms")), ParseError);
  }
  SUBCASE("map outside a block") {
    testutil::write_file(tmp.file("loose.synonyms"), "map low\tcheap\n");
    CHECK_THROWS_AS(load_synonyms(tmp.file("loose.synonyms")), ParseError);
  }
}

TEST_CASE("check_synonyms flags unknown slots and non-member targets") {
  Ontology ontology = tiny_ontology();
  NormalizationConfig config;
  config.synonyms[{"hotel", "pricerange"}]["low"] = "cheap";          // fine
  config.synonyms[{"hotel", "pricerange"}]["bargain"] = "petite";     // not a member
  config.synonyms[{"taxi", "colour"}]["crimson"] = "red";             // unknown slot

  Diagnostics diags = check_synonyms(config, ontology);
  REQUIRE(diags.size() == 2);
  bool saw_error = false, saw_warning = false;
  for (const Diagnostic& d : diags) {
    if (d.severity == Severity::error) saw_error = true;
    if (d.severity == Severity::warning) saw_warning = true;
  }
  CHECK(saw_error);
  CHECK(saw_warning);
}
