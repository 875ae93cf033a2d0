#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oretag/corpus.hpp"
#include "oretag/random.hpp"

using namespace oretag;
using namespace oretag::corpus;
using oretag::testing::figure_sentence;
using oretag::testing::figure_triples;
using oretag::testing::make_sentence;
using oretag::testing::span;

namespace {

ExtractorOutput out(std::string sid, std::string who, std::optional<double> conf,
                    std::string a1, std::string r, std::string a2) {
  return {std::move(sid), std::move(who), conf, {std::move(a1), std::move(r), std::move(a2)}};
}

std::vector<ExtractorOutput> figure_outputs() {
  std::vector<ExtractorOutput> v;
  for (const char* who : {"ollie", "clausie", "openie4"}) {
    v.push_back(out("fig1", who, 0.9, "The America", "President", "Trump"));
    v.push_back(out("fig1", who, 0.8, "Trump", "will visit", "the Apple"));
    v.push_back(out("fig1", who, std::nullopt, "the Apple", "founded by", "Steven Paul Jobs"));
  }
  return v;
}

std::string word(std::size_t i) { return "w" + std::to_string(i); }

// Sentence of distinct words with a planted triple at random positions.
struct Planted {
  Sentence sentence;
  Triple triple;
  PhraseTriple phrases;
};

Planted plant(Rng& rng, std::size_t id) {
  const std::size_t n = 8 + rng.index(8);
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  rng.shuffle(pool);
  const std::size_t take = 3 + rng.index(std::min<std::size_t>(n - 3, 5));
  std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(chosen.begin(), chosen.end());
  // Cut the sorted positions into three non-empty consecutive groups.
  const std::size_t c1 = 1 + rng.index(take - 2);
  const std::size_t c2 = c1 + 1 + rng.index(take - c1 - 1);
  Planted p;
  p.sentence.id = "s" + std::to_string(1000 + id);
  for (std::size_t i = 0; i < n; ++i) p.sentence.tokens.push_back({word(id * 100 + i), "NN"});
  auto group = [&](std::size_t b, std::size_t e, SpanSet& s, std::string& text) {
    for (std::size_t k = b; k < e; ++k) {
      s.positions.push_back(chosen[k]);
      text += (text.empty() ? "" : " ") + p.sentence.tokens[chosen[k]].surface;
    }
  };
  group(0, c1, p.triple.arg1, p.phrases.arg1);
  group(c1, c2, p.triple.rel, p.phrases.rel);
  group(c2, take, p.triple.arg2, p.phrases.arg2);
  return p;
}

std::vector<CorpusRecord> synthetic_records(std::size_t sentences, std::size_t per_sentence) {
  std::vector<CorpusRecord> out;
  for (std::size_t s = 0; s < sentences; ++s) {
    const Sentence sent = make_sentence("s" + std::to_string(s), "a b c d e f");
    for (std::size_t k = 0; k < per_sentence; ++k) {
      CorpusRecord r;
      r.sentence = sent;
      r.arg1 = span({0});
      r.arg2 = span({5});
      r.gold_tags = tags::encode_relation(6, span({1 + k % 3}));
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("normalization lowercases, collapses whitespace and strips terminal punctuation") {
  CHECK(normalize_phrase("Will Visit ") == "will visit");
  CHECK(normalize_phrase("  the   Apple.") == "the apple");
  CHECK(normalize_phrase("Jobs !?") == "jobs");
  CHECK(normalize_phrase("U.S. army") == "u.s. army");
  CHECK(normalize_phrase(" . ") == "");
}

TEST_CASE("intersect keeps triples every extractor agrees on") {
  const auto outputs = figure_outputs();
  const auto agreed = intersect(outputs, {});
  REQUIRE(agreed.count("fig1"));
  CHECK(agreed.at("fig1").size() == 3);

  std::vector<ExtractorOutput> two(outputs.begin(), outputs.begin() + 6);
  CHECK(intersect(two, {}).empty());
  CHECK(intersect(two, {.required = 2}).at("fig1").size() == 3);
}

TEST_CASE("intersect treats differently spaced and cased phrases as equal") {
  std::vector<ExtractorOutput> v = {out("1", "a", 0.9, "Trump", "Will Visit ", "the Apple"),
                                    out("1", "b", 0.9, "trump", "will visit", "the apple."),
                                    out("1", "c", 0.9, "TRUMP ", "will  visit", "The Apple")};
  const auto agreed = intersect(v, {});
  REQUIRE(agreed.at("1").size() == 1);
  CHECK(agreed.at("1")[0] == PhraseTriple{"trump", "will visit", "the apple"});
}

TEST_CASE("intersect counts distinct extractors and drops low confidence") {
  std::vector<ExtractorOutput> v = {out("1", "a", 0.9, "x", "y", "z"), out("1", "a", 0.9, "x", "y", "z"),
                                    out("1", "b", 0.9, "x", "y", "z")};
  CHECK(intersect(v, {}).empty());
  v.push_back(out("1", "c", 0.5, "x", "y", "z"));
  CHECK(intersect(v, {}).empty());
  v.back().confidence = 0.51;
  CHECK(intersect(v, {}).size() == 1);
  // Same triple in another sentence is a different triple.
  v.back().sentence_id = "2";
  CHECK(intersect(v, {}).empty());
  CHECK_THROWS_AS(intersect(v, {.required = 1}), ConfigError);
}

TEST_CASE("intersect is insensitive to input order") {
  Rng rng(7);
  std::vector<ExtractorOutput> v;
  const std::vector<std::string> who = {"a", "b", "c", "d"};
  for (int i = 0; i < 300; ++i) {
    v.push_back(out(std::to_string(rng.index(5)), who[rng.index(4)],
                    rng.uniform() < 0.2 ? std::optional<double>() : rng.uniform(),
                    word(rng.index(3)), word(rng.index(2)), word(rng.index(3))));
  }
  const auto reference = intersect(v, {});
  CHECK_FALSE(reference.empty());
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(v);
    CHECK(intersect(v, {}) == reference);
  }
}

TEST_CASE("extractor files skip malformed lines with a warning") {
  std::istringstream in(
      "1\tollie\t0.9\tTrump\twill visit\tthe Apple\n"
      "1\tclausie\t\tTrump\twill visit\tthe Apple\n"
      "broken line\n"
      "1\topenie4\tabc\tTrump\twill visit\tthe Apple\n"
      "1\topenie4\t0.7\t  \twill visit\tthe Apple\n"
      "\n"
      "2\tollie\t0.6\ta\tb\tc\r\n");
  const auto parsed = read_extractions(in);
  REQUIRE(parsed.items.size() == 3);
  CHECK_FALSE(parsed.items[1].confidence.has_value());
  CHECK(parsed.items[2].triple.arg2 == "c");
  REQUIRE(parsed.warnings.size() == 3);
  CHECK(parsed.warnings[0].line == 3);
  CHECK(parsed.warnings[1].line == 4);
  CHECK(parsed.warnings[2].line == 5);
}

TEST_CASE("sentence files split POS on the last underscore") {
  std::istringstream in(
      "s1\tThe_DT New_York_NP Times_NP\n"
      "s2\tbad token_\n"
      "s1\tAgain_RB\n");
  const auto parsed = read_sentences(in);
  REQUIRE(parsed.items.size() == 1);
  const auto& s = parsed.items[0];
  REQUIRE(s.size() == 3);
  CHECK(s.tokens[1].surface == "New_York");
  CHECK(s.tokens[1].pos == "NP");
  CHECK(parsed.warnings.size() == 2);
}

TEST_CASE("alignment recovers the running example") {
  const Sentence s = figure_sentence();
  const auto expected = figure_triples();
  const auto agreed = intersect(figure_outputs(), {});
  std::vector<Triple> got;
  for (const auto& p : agreed.at("fig1")) {
    auto t = align_triple(s, p);
    REQUIRE(t.has_value());
    got.push_back(*t);
  }
  std::sort(got.begin(), got.end());
  auto want = expected;
  std::sort(want.begin(), want.end());
  CHECK(got == want);
}

TEST_CASE("alignment follows word order and rejects impossible triples") {
  const Sentence s = make_sentence(
      "x", "He thought the current would take him out , then he could bring help to rescue me");
  CHECK_FALSE(align_triple(s, {"the current", "would take out", "him"}).has_value());
  const auto ok = align_triple(s, {"the current", "would take", "him"});
  REQUIRE(ok.has_value());
  CHECK(ok->arg1 == span({2, 3}));
  CHECK(ok->rel == span({4, 5}));
  CHECK(ok->arg2 == span({6}));
  // Non-contiguous relation words are found in order.
  const auto gap = align_triple(s, {"he", "could help", "me"});
  REQUIRE(gap.has_value());
  CHECK(gap->arg1 == span({0}));
  CHECK(gap->rel == span({11, 13}));
  CHECK(gap->arg2 == span({16}));
  CHECK_FALSE(align_triple(s, {"she", "thought", "me"}).has_value());
}

TEST_CASE("alignment is leftmost when a word repeats") {
  const Sentence s = make_sentence("x", "a b a b c a c");
  const auto t = align_triple(s, {"a", "b", "c"});
  REQUIRE(t.has_value());
  CHECK(t->arg1 == span({0}));
  CHECK(t->rel == span({1}));
  CHECK(t->arg2 == span({4}));
}

TEST_CASE("alignment recovers planted triples") {
  Rng rng(11);
  for (std::size_t i = 0; i < 200; ++i) {
    const auto p = plant(rng, i);
    const auto t = align_triple(p.sentence, p.phrases);
    REQUIRE(t.has_value());
    CHECK(*t == p.triple);
  }
}

TEST_CASE("the running example yields three overlapping records") {
  const std::vector<Sentence> sentences = {figure_sentence()};
  const auto result = build_records(sentences, intersect(figure_outputs(), {}));
  REQUIRE(result.records.size() == 3);
  CHECK(result.stats.records == 3);
  CHECK(result.stats.overlapping_records == 3);
  CHECK(result.stats.overlap_proportion() == doctest::Approx(1.0));
  for (const auto& r : result.records) {
    CHECK(r.gold_tags.size() == r.sentence.size());
    // Full triple survives an encode/decode round trip.
    const Triple t{r.arg1, r.relation(), r.arg2};
    const auto decoded = tags::decode_tags(r.sentence, tags::encode_tags(r.sentence, t));
    REQUIRE(decoded.triple.has_value());
    CHECK(*decoded.triple == t);
  }
}

TEST_CASE("no agreed triples gives no records but still counts sentences") {
  const std::vector<Sentence> sentences = {figure_sentence(), make_sentence("b", "x y z")};
  const auto result = build_records(sentences, {});
  CHECK(result.records.empty());
  CHECK(result.stats.sentences == 2);
  CHECK(result.stats.overlap_proportion() == 0.0);
}

TEST_CASE("record count matches a direct nested loop on a synthetic batch") {
  Rng rng(5);
  std::vector<Sentence> sentences;
  AgreedTriples agreed;
  std::size_t oracle = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto p = plant(rng, i);
    sentences.push_back(p.sentence);
    auto& list = agreed[p.sentence.id];
    list.push_back(p.phrases);
    // A decoy with a word that never occurs in the sentence.
    if (rng.uniform() < 0.5) list.push_back({p.phrases.arg1, "absent", p.phrases.arg2});
    // An argument-swapped decoy: aligns only if arg2 words precede the relation somewhere.
    if (rng.uniform() < 0.3) list.push_back({p.phrases.arg2, p.phrases.rel, p.phrases.arg1});
    std::sort(list.begin(), list.end());
  }
  agreed["missing"].push_back({"a", "b", "c"});

  // Oracle: brute force over all ordered position assignments of the
  // phrase words, accepting when some assignment meets the order rules.
  const auto alignable = [](const Sentence& s, const PhraseTriple& p) {
    std::vector<std::string> words;
    std::vector<int> role;
    int r = 0;
    for (const std::string* text : {&p.arg1, &p.rel, &p.arg2}) {
      std::istringstream in(*text);
      for (std::string w; in >> w;) {
        words.push_back(w);
        role.push_back(r);
      }
      ++r;
    }
    // Words are distinct within a sentence, so each has at most one position.
    std::vector<std::size_t> at;
    for (const auto& w : words) {
      std::size_t found = s.size();
      for (std::size_t t = 0; t < s.size(); ++t)
        if (s.tokens[t].surface == w) found = t;
      if (found == s.size()) return false;
      at.push_back(found);
    }
    for (std::size_t k = 1; k < at.size(); ++k)
      if (at[k - 1] >= at[k]) return false;
    return true;
  };
  for (const auto& s : sentences)
    for (const auto& p : agreed[s.id]) oracle += alignable(s, p) ? 1 : 0;

  const auto one = build_records(sentences, agreed, 1);
  CHECK(one.records.size() == oracle);
  CHECK(one.stats.rejects.at("unknown_sentence") == 1);
  CHECK(one.stats.rejects.at("unalignable") + oracle + 1 == one.stats.agreed_triples);

  const auto four = build_records(sentences, agreed, 4);
  REQUIRE(four.records.size() == one.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(four.records[i].sentence.id == one.records[i].sentence.id);
    CHECK(four.records[i].gold_tags == one.records[i].gold_tags);
  }
  CHECK(std::is_sorted(one.records.begin(), one.records.end(),
                       [](const CorpusRecord& a, const CorpusRecord& b) {
                         return a.sentence.id < b.sentence.id;
                       }));
}

TEST_CASE("duplicate alignments are de-duplicated") {
  const std::vector<Sentence> sentences = {make_sentence("d", "Trump visits Apple .")};
  AgreedTriples agreed;
  agreed["d"] = {{"trump", "visits", "apple"}, {"trump", "visits", "apple ."}};
  const auto result = build_records(sentences, agreed);
  CHECK(result.records.size() == 1);
  CHECK(result.stats.rejects.at("duplicate") == 1);
}

TEST_CASE("split follows the requested proportion by sentence") {
  const auto records = synthetic_records(1000, 1);
  const auto s = split(records, 0.172, 3);
  CHECK(s.validation.size() >= 171);
  CHECK(s.validation.size() <= 173);
  CHECK(s.train.size() + s.validation.size() == 1000);
}

TEST_CASE("split is a deterministic partition that keeps sentences together") {
  const auto records = synthetic_records(40, 3);
  const auto a = split(records, 0.25, 9);
  const auto b = split(records, 0.25, 9);
  const auto ids = [](const std::vector<CorpusRecord>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.sentence.id);
    return out;
  };
  CHECK(ids(a.train) == ids(b.train));
  CHECK(ids(a.validation) == ids(b.validation));
  CHECK(a.train.size() + a.validation.size() == records.size());
  const auto tr = ids(a.train), va = ids(a.validation);
  const std::set<std::string> train_ids(tr.begin(), tr.end()), val_ids(va.begin(), va.end());
  for (const auto& id : val_ids) CHECK_FALSE(train_ids.count(id));
  CHECK(a.validation.size() % 3 == 0);
  CHECK(ids(split(records, 0.25, 10).validation) != ids(a.validation));
}

TEST_CASE("split rejects degenerate inputs") {
  CHECK_THROWS_AS(split(synthetic_records(1, 3), 0.5, 1), InputError);
  CHECK_THROWS_AS(split(synthetic_records(10, 1), 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split(synthetic_records(10, 1), 1.0, 1), ConfigError);
  const auto s = split(synthetic_records(2, 1), 0.01, 1);
  CHECK(s.train.size() == 1);
  CHECK(s.validation.size() == 1);
}

TEST_CASE("corpus records round-trip through JSON lines") {
  const std::vector<Sentence> sentences = {figure_sentence()};
  const auto result = build_records(sentences, intersect(figure_outputs(), {}));
  std::stringstream io;
  for (const auto& r : result.records) write_record(io, r);
  const auto back = read_corpus(io);
  REQUIRE(back.size() == result.records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].sentence.id == "fig1");
    CHECK(back[i].sentence.tokens[13].pos == "SENT");
    CHECK(back[i].arg1 == result.records[i].arg1);
    CHECK(back[i].arg2 == result.records[i].arg2);
    CHECK(back[i].gold_tags == result.records[i].gold_tags);
  }
  std::istringstream bad(R"({"tokens":["a","b"],"pos":["X","Y"],"arg1_positions":[0],)"
                         R"("arg2_positions":[0],"tags":["O","R-S"]})" "\n");
  CHECK_THROWS_AS(read_corpus(bad), FormatError);
  std::istringstream junk("{not json\n");
  CHECK_THROWS_AS(read_corpus(junk), FormatError);
}

TEST_CASE("vocabulary reserves UNK and PAD and is injective") {
  const auto records = synthetic_records(3, 1);
  const auto v = build_vocab(records);
  CHECK(v.words.token(Vocab::kUnk) == "<unk>");
  CHECK(v.words.token(Vocab::kPad) == "<pad>");
  CHECK(v.words.size() == 2 + 6);
  CHECK(v.pos.size() == 3);
  std::set<std::size_t> seen;
  for (const auto& t : v.words.tokens()) CHECK(seen.insert(v.words.index(t)).second);
  CHECK(v.words.index("never-seen") == Vocab::kUnk);
  CHECK(word_key("Apple") == "apple");
}

TEST_CASE("word vectors fill known rows and randomize the rest") {
  Vocab vocab;
  for (const char* w : {"apple", "trump", "visit"}) vocab.add(w);

  SUBCASE("empty file gives an all-random table") {
    std::istringstream in("");
    const auto wv = load_word_vectors(in, vocab, 4, 1);
    CHECK(wv.from_file == 0);
    CHECK(wv.random == 4);
    CHECK(wv.table.requires_grad());
    for (double x : wv.table.values()) CHECK(std::abs(x) <= 0.05);
    for (std::size_t k = 0; k < 4; ++k) CHECK(wv.table.at(Vocab::kPad, k) == 0.0);
  }
  SUBCASE("full coverage leaves no random rows") {
    std::istringstream in("4 2\n<unk> 0 0\napple 1 2\nTrump 3 4\nvisit 5 6\n");
    const auto wv = load_word_vectors(in, vocab, 2, 1);
    CHECK(wv.random == 0);
    CHECK(wv.from_file == 4);
  }
  SUBCASE("mixed coverage matches the file where present") {
    std::istringstream in("apple 0.5 -1 2\nzebra 9 9 9\nvisit 1e-3 0 4\n");
    const auto wv = load_word_vectors(in, vocab, 3, 2);
    const auto fresh = random_word_vectors(vocab, 3, 2);
    CHECK(wv.from_file == 2);
    CHECK(wv.random == 2);
    const std::vector<double> apple = {0.5, -1, 2}, visit = {1e-3, 0, 4};
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(wv.table.at(vocab.index("apple"), k) == apple[k]);
      CHECK(wv.table.at(vocab.index("visit"), k) == visit[k]);
      CHECK(wv.table.at(vocab.index("trump"), k) == fresh.table.at(vocab.index("trump"), k));
    }
  }
  SUBCASE("inconsistent dimension names the line") {
    std::istringstream in("apple 1 2\n\ntrump 1 2 3\n");
    try {
      load_word_vectors(in, vocab, 2, 1);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("file dimension must match the configured one") {
    std::istringstream in("apple 1 2\n");
    CHECK_THROWS_AS(load_word_vectors(in, vocab, 3, 1), FormatError);
  }
}
