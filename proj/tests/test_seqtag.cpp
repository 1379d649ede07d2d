#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>

#include "scireward/seqtag.hpp"

using namespace scireward::seqtag;

TEST_CASE("parse_tagged extracts payloads in order", "[seqtag]") {
  auto seqs = parse_tagged("<SMILES> CCO </SMILES>");
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].kind == SeqKind::smiles);
  CHECK(seqs[0].body == "CCO");

  seqs = parse_tagged("x <protein>MKV</protein> y <dna>ACGT</dna>");
  REQUIRE(seqs.size() == 2);
  CHECK(seqs[0].kind == SeqKind::protein);
  CHECK(seqs[0].body == "MKV");
  CHECK(seqs[1].kind == SeqKind::dna);
  CHECK(seqs[1].body == "ACGT");
  CHECK(seqs[0].begin < seqs[1].begin);
  CHECK(seqs[0].end <= seqs[1].begin);
}

TEST_CASE("parse_tagged flags malformed tags", "[seqtag]") {
  CHECK_THROWS_MATCHES(parse_tagged("<rna>ACGU"), TagError,
                       Catch::Matchers::Predicate<TagError>([](const TagError& e) {
                         return e.code() == TagError::Code::missing_close_tag &&
                                e.kind() == SeqKind::rna;
                       }));
  CHECK_THROWS_MATCHES(parse_tagged("<dna>AC<rna>GU</rna></dna>"), TagError,
                       Catch::Matchers::Predicate<TagError>([](const TagError& e) {
                         return e.code() == TagError::Code::nested_tag;
                       }));
  // A stray close tag outside any open tag is untagged text.
  CHECK(parse_tagged("noise </dna> more noise").empty());
}

TEST_CASE("parse_tagged ignores untagged text and handles materials", "[seqtag]") {
  CHECK(parse_tagged("no tags at all").empty());
  auto seqs = parse_tagged("<material>Zr Zr O O <sg> <sg61></material>");
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].body == "Zr Zr O O <sg> <sg61>");
}

TEST_CASE("wrap follows the per-kind spacing convention", "[seqtag]") {
  CHECK(wrap(SeqKind::dna, "ACGT") == "<dna>ACGT</dna>");
  CHECK(wrap(SeqKind::smiles, "CCO") == "<SMILES> CCO </SMILES>");
  CHECK(wrap(SeqKind::iupac, "2,5-diphenyl-1,3-oxazole") ==
        "<IUPAC> 2,5-diphenyl-1,3-oxazole </IUPAC>");
  CHECK_THROWS_MATCHES(wrap(SeqKind::protein, "MK<dna>"), TagError,
                       Catch::Matchers::Predicate<TagError>([](const TagError& e) {
                         return e.code() == TagError::Code::body_contains_tag;
                       }));
  CHECK_THROWS_AS(wrap(SeqKind::dna, ""), std::invalid_argument);
}

TEST_CASE("wrap/parse round-trip over random alphabet bodies", "[seqtag]") {
  std::mt19937_64 rng(7);
  const std::string alphabets[] = {
      "CNOPSFIcno()=#123",            // smiles-ish
      "ACGTN",                        // dna
      "ACGUN",                        // rna
      "ACDEFGHIKLMNPQRSTVWYX",        // protein
      "ACGUacgu f",                   // sirna (inner spaces allowed)
  };
  const SeqKind kinds[] = {SeqKind::smiles, SeqKind::dna, SeqKind::rna, SeqKind::protein,
                           SeqKind::sirna};
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t which = rng() % 5;
    const std::string& alphabet = alphabets[which];
    std::uniform_int_distribution<std::size_t> length(1, 24);
    std::string body;
    std::size_t n = length(rng);
    for (std::size_t i = 0; i < n; ++i) body += alphabet[rng() % alphabet.size()];
    // Trimmed bodies round-trip; whitespace at the edges is parse-trimmed.
    while (!body.empty() && body.front() == ' ') body.erase(body.begin());
    while (!body.empty() && body.back() == ' ') body.pop_back();
    if (body.empty()) continue;
    auto seqs = parse_tagged(wrap(kinds[which], body));
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].kind == kinds[which]);
    CHECK(seqs[0].body == body);
  }
}

TEST_CASE("parse_tagged offsets strictly increase", "[seqtag]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    std::size_t tags = 1 + rng() % 5;
    for (std::size_t i = 0; i < tags; ++i) {
      text += "pad" + std::to_string(rng() % 100) + " ";
      text += wrap(SeqKind::dna, "ACGT");
    }
    auto seqs = parse_tagged(text);
    REQUIRE(seqs.size() == tags);
    for (std::size_t i = 1; i < seqs.size(); ++i) {
      CHECK(seqs[i - 1].begin < seqs[i].begin);
      CHECK(seqs[i - 1].end <= seqs[i].begin);
    }
    for (const auto& seq : seqs) {
      CHECK(seq.end <= text.size());
    }
  }
}

TEST_CASE("validate_alphabet locates the first bad symbol", "[seqtag]") {
  auto ok = validate_alphabet({SeqKind::dna, "ACGT", 0, 0});
  CHECK_FALSE(ok.has_value());

  auto bad = validate_alphabet({SeqKind::dna, "ACGU", 0, 0});
  REQUIRE(bad.has_value());
  CHECK(bad->position == 3);
  CHECK(bad->symbol == 'U');

  bad = validate_alphabet({SeqKind::protein, "MK@", 0, 0});
  REQUIRE(bad.has_value());
  CHECK(bad->position == 2);
  CHECK(bad->symbol == '@');

  // The printed siRNA style: lower-case residues with 'f' modifications.
  CHECK_FALSE(validate_alphabet({SeqKind::sirna, "a Af a c u Uf g", 0, 0}).has_value());
}

TEST_CASE("validate_alphabet is total on arbitrary bytes", "[seqtag]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::string body;
    std::size_t n = rng() % 40;
    for (std::size_t i = 0; i < n; ++i) body += static_cast<char>(rng() % 256);
    for (auto kind : {SeqKind::dna, SeqKind::rna, SeqKind::protein, SeqKind::sirna,
                      SeqKind::smiles, SeqKind::material}) {
      auto result = validate_alphabet({kind, body, 0, 0});
      if (result) {
        CHECK(result->position < body.size());
        CHECK(result->symbol == body[result->position]);
      }
    }
  }
}

TEST_CASE("split_reasoning separates think blocks", "[seqtag]") {
  auto split = split_reasoning("<think>reason</think>Indirect");
  REQUIRE(split.thinking.has_value());
  CHECK(*split.thinking == "reason");
  CHECK(split.answer == "Indirect");

  split = split_reasoning("Indirect");
  CHECK_FALSE(split.thinking.has_value());
  CHECK(split.answer == "Indirect");

  CHECK_THROWS_MATCHES(split_reasoning("<think>reason"), TagError,
                       Catch::Matchers::Predicate<TagError>([](const TagError& e) {
                         return e.code() == TagError::Code::unclosed_think_block;
                       }));
}

TEST_CASE("split_reasoning keeps surrounding answer text", "[seqtag]") {
  auto split = split_reasoning("  <think> chain </think>  {volume: 128.62}  ");
  REQUIRE(split.thinking.has_value());
  CHECK(*split.thinking == "chain");
  CHECK(split.answer == "{volume: 128.62}");

  // compose/parse agree
  auto composed = compose_reasoning("steps", "Indirect");
  CHECK(composed == "<think>steps</think>Indirect");
  auto back = split_reasoning(composed);
  CHECK(*back.thinking == "steps");
  CHECK(back.answer == "Indirect");
}
