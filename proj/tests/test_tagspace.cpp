#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "fixtures.hpp"
#include "oretag/random.hpp"
#include "oretag/tagspace.hpp"

using namespace oretag;
using namespace oretag::tags;
using oretag::testing::figure_sentence;
using oretag::testing::figure_triples;
using oretag::testing::make_sentence;
using oretag::testing::span;

namespace {

// Independent restatement of the acceptance rules for a triple.
bool order_oracle(const Triple& t) {
  const auto increasing = [](const std::vector<std::size_t>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i - 1] >= v[i]) return false;
    return !v.empty();
  };
  if (!increasing(t.arg1.positions) || !increasing(t.rel.positions) ||
      !increasing(t.arg2.positions))
    return false;
  for (std::size_t a : t.arg1.positions)
    for (std::size_t r : t.rel.positions)
      if (a >= r) return false;
  for (std::size_t b : t.arg2.positions)
    for (std::size_t r : t.rel.positions)
      if (b <= r) return false;
  return true;
}

SpanSet random_subset(Rng& rng, std::size_t lo, std::size_t hi) {
  SpanSet s;
  for (std::size_t p = lo; p < hi; ++p)
    if (rng.index(2)) s.positions.push_back(p);
  if (s.empty()) s.positions.push_back(lo + rng.index(hi - lo));
  return s;
}

Triple random_valid_triple(Rng& rng, std::size_t length) {
  // Split [0, length) into three non-empty windows.
  const std::size_t a = 1 + rng.index(length - 2);
  const std::size_t b = a + 1 + rng.index(length - a - 1);
  return {random_subset(rng, 0, a), random_subset(rng, a, b), random_subset(rng, b, length)};
}

Sentence sentence_of_length(std::size_t n) {
  Sentence s;
  s.id = "s";
  for (std::size_t i = 0; i < n; ++i) s.tokens.push_back({"w" + std::to_string(i), "NN"});
  return s;
}

}  // namespace

TEST_CASE("tag labels serialize as ASCII strings") {
  CHECK(to_string(Tag::of(Role::kArg1, Position::kBegin)) == "E1-B");
  CHECK(to_string(Tag::of(Role::kRel, Position::kSingle)) == "R-S");
  CHECK(to_string(Tag::of(Role::kArg2, Position::kInside)) == "E2-I");
  CHECK(to_string(Tag::outside()) == "O");
  for (const char* text : {"E1-B", "E1-I", "E1-E", "E1-S", "R-B", "R-I", "R-E", "R-S", "E2-B",
                           "E2-I", "E2-E", "E2-S", "O"}) {
    CHECK(to_string(parse_tag(text)) == text);
  }
  CHECK_THROWS_AS(parse_tag("R-X"), FormatError);
  CHECK_THROWS_AS(parse_tag("E3-B"), FormatError);
}

TEST_CASE("word-order constraints reject the out-of-order extractor triple") {
  const Sentence s = make_sentence(
      "s", "He thought the current would take him out , then he could bring help to rescue me");
  const Triple t{span({2, 3}), span({4, 5, 7}), span({6})};
  const auto violations = validate_order(s, t);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind == ViolationKind::kArg2NotAfterRelation);
  CHECK(violations[0].message.find("\"him\"") != std::string::npos);
  CHECK(violations[0].message.find("\"out\"") != std::string::npos);
  CHECK_THROWS_AS(encode_tags(s, t), ConstraintViolation);
}

TEST_CASE("strictly ordered singleton spans pass") {
  const Sentence s = make_sentence("s", "a b c");
  CHECK(validate_order(s, Triple{span({0}), span({1}), span({2})}).empty());
}

TEST_CASE("out-of-range positions are an input error, not a violation") {
  const Sentence s = make_sentence("s", "a b c");
  CHECK_THROWS_AS(validate_order(s, Triple{span({0}), span({1}), span({3})}), InputError);
}

TEST_CASE("validate_order agrees with a direct restatement on random spans") {
  Rng rng(21);
  const Sentence s = sentence_of_length(10);
  for (int trial = 0; trial < 1000; ++trial) {
    Triple t;
    for (SpanSet* part : {&t.arg1, &t.rel, &t.arg2}) {
      const std::size_t n = 1 + rng.index(3);
      for (std::size_t k = 0; k < n; ++k) part->positions.push_back(rng.index(10));
    }
    CAPTURE(trial);
    CHECK(validate_order(s, t).empty() == order_oracle(t));
  }
}

TEST_CASE("shuffled relation positions always violate") {
  Rng rng(4);
  const Sentence s = sentence_of_length(12);
  for (int trial = 0; trial < 200; ++trial) {
    Triple t = random_valid_triple(rng, 12);
    if (t.rel.positions.size() < 2) continue;
    auto shuffled = t.rel.positions;
    do {
      rng.shuffle(shuffled);
    } while (shuffled == t.rel.positions);
    t.rel.positions = shuffled;
    const auto v = validate_order(s, t);
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].kind == ViolationKind::kRelationOutOfOrder);
  }
}

TEST_CASE("encode_tags on a simple triple") {
  const Sentence s = make_sentence("s", "a b c d e");
  const auto seq = encode_tags(s, Triple{span({0, 1}), span({2}), span({3})});
  CHECK(to_string(seq) == "E1-B E1-E R-S E2-S O");
}

TEST_CASE("overlapping triples get independent sequences that decode to themselves") {
  const Sentence s = figure_sentence();
  const auto triples = figure_triples();
  const std::vector<std::string> expected = {
      "E1-B E1-E R-S E2-S O O O O O O O O O O",
      "O O O E1-S R-B R-E E2-B E2-E O O O O O O",
      "O O O O O O E1-B E1-E R-B R-E E2-B E2-I E2-E O",
  };
  const std::vector<std::array<std::string, 3>> texts = {
      {"The America", "President", "Trump"},
      {"Trump", "will visit", "the Apple"},
      {"the Apple", "founded by", "Steven Paul Jobs"},
  };
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const auto seq = encode_tags(s, triples[k]);
    CHECK(to_string(seq) == expected[k]);
    const auto decoded = decode_tags(s, seq);
    REQUIRE(decoded.status == DecodeStatus::kOk);
    CHECK(*decoded.triple == triples[k]);
    CHECK(span_text(s, decoded.triple->arg1) == texts[k][0]);
    CHECK(span_text(s, decoded.triple->rel) == texts[k][1]);
    CHECK(span_text(s, decoded.triple->arg2) == texts[k][2]);
  }
}

TEST_CASE("encode/decode round trip on random valid triples") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + rng.index(14);
    const Sentence s = sentence_of_length(n);
    const Triple t = random_valid_triple(rng, n);
    const auto seq = encode_tags(s, t);
    const auto decoded = decode_tags(s, seq);
    REQUIRE(decoded.status == DecodeStatus::kOk);
    REQUIRE(*decoded.triple == t);
    // Re-encoding the decoded triple reproduces the sequence.
    REQUIRE(encode_tags(s, *decoded.triple) == seq);
    // Relation-only view agrees.
    const auto rel = decode_relation(encode_relation(n, t.rel));
    REQUIRE(rel.relation.has_value());
    REQUIRE(*rel.relation == t.rel);
  }
}

TEST_CASE("decode failures carry a reason") {
  const Sentence s = make_sentence("s", "a b c d");
  TagSequence all_o(4, Tag::outside());
  CHECK(decode_tags(s, all_o).status == DecodeStatus::kMissing);
  CHECK(decode_relation(all_o).status == DecodeStatus::kMissing);

  TagSequence bad = all_o;
  bad[1] = Tag::of(Role::kRel, Position::kInside);
  bad[2] = Tag::of(Role::kRel, Position::kEnd);
  CHECK(decode_relation(bad).status == DecodeStatus::kSchemeViolation);

  TagSequence two_singles = all_o;
  two_singles[1] = Tag::of(Role::kRel, Position::kSingle);
  two_singles[3] = Tag::of(Role::kRel, Position::kSingle);
  CHECK(decode_relation(two_singles).status == DecodeStatus::kSchemeViolation);

  // Gaps inside a relation are legal.
  TagSequence gap = all_o;
  gap[0] = Tag::of(Role::kRel, Position::kBegin);
  gap[3] = Tag::of(Role::kRel, Position::kEnd);
  const auto r = decode_relation(gap);
  REQUIRE(r.relation.has_value());
  CHECK(r.relation->positions == std::vector<std::size_t>{0, 3});

  CHECK_THROWS_AS(decode_tags(s, TagSequence(3, Tag::outside())), InputError);
}

TEST_CASE("relation label alphabet") {
  for (std::size_t k = 0; k < kRelationLabels; ++k) {
    CHECK(relation_label_index(relation_label(k)) == k);
  }
  CHECK(relation_label(kOutsideLabel).is_outside());
  CHECK_THROWS_AS(relation_label_index(Tag::of(Role::kArg1, Position::kBegin)), InputError);
}

TEST_CASE("argument one-hot symbols") {
  const Sentence s = figure_sentence();
  const auto symbols = argument_onehot(s, span({0, 1}), span({3}), 16);
  CHECK(symbols.size() == 16);
  CHECK(symbols[2] == ArgSymbol::kOutside);
  CHECK(symbols[3] == ArgSymbol::kE2Single);
  CHECK(symbols[14] == ArgSymbol::kPad);
  CHECK(symbols[15] == ArgSymbol::kPad);
  CHECK(std::count(symbols.begin(), symbols.begin() + 14, ArgSymbol::kPad) == 0);

  // Restricting the full tag sequence to the argument roles gives the same symbols.
  const auto seq = encode_tags(s, figure_triples()[0]);
  for (std::size_t t = 0; t < s.size(); ++t) {
    const Tag& tag = seq[t];
    std::string expected = "O";
    if (!tag.is_outside() && *tag.role != Role::kRel) expected = to_string(tag);
    CHECK(std::string(to_string(symbols[t])) == expected);
  }

  CHECK_THROWS_AS(argument_onehot(s, span({0, 1}), span({1, 2})), InputError);
}
