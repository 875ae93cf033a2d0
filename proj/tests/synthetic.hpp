#pragma once

#include <string>
#include <vector>

#include "oretag/corpus.hpp"
#include "oretag/random.hpp"

namespace oretag::testing {

// Templated sentences "[prefix] arg1 [adverb] relation arg2 [.]" with a
// small closed vocabulary. Each sentence carries one record whose gold
// relation is the relation phrase.
inline std::vector<corpus::CorpusRecord> templated_records(std::size_t count, std::uint64_t seed) {
  using Phrase = std::vector<std::pair<const char*, const char*>>;
  const std::vector<Phrase> subjects = {
      {{"alice", "NP"}}, {{"bob", "NP"}}, {{"carol", "NP"}},
      {{"the", "DT"}, {"company", "NN"}}, {{"the", "DT"}, {"mayor", "NN"}},
      {{"paul", "NP"}, {"smith", "NP"}}};
  const std::vector<Phrase> objects = {
      {{"paris", "NP"}}, {{"london", "NP"}}, {{"berlin", "NP"}},
      {{"the", "DT"}, {"museum", "NN"}}, {{"the", "DT"}, {"river", "NN"}},
      {{"a", "DT"}, {"new", "JJ"}, {"lab", "NN"}}};
  const std::vector<Phrase> relations = {
      {{"visited", "VVD"}},
      {{"will", "MD"}, {"visit", "VV"}},
      {{"was", "VBD"}, {"founded", "VVN"}, {"by", "IN"}},
      {{"lives", "VVZ"}, {"in", "IN"}},
      {{"has", "VHZ"}, {"never", "RB"}, {"seen", "VVN"}},
      {{"moved", "VVD"}, {"to", "TO"}},
      {{"is", "VBZ"}, {"near", "IN"}}};
  const std::vector<Phrase> prefixes = {
      {}, {}, {{"yesterday", "NN"}, {",", ","}}, {{"in", "IN"}, {"2010", "CD"}}};
  const std::vector<Phrase> adverbs = {{}, {}, {}, {{"often", "RB"}}, {{"quietly", "RB"}}};

  Rng rng(seed);
  std::vector<corpus::CorpusRecord> out;
  for (std::size_t i = 0; i < count; ++i) {
    corpus::CorpusRecord r;
    r.sentence.id = "t" + std::to_string(1000 + i);
    r.source = "template";
    auto append = [&](const Phrase& p, SpanSet* span) {
      for (const auto& [w, pos] : p) {
        if (span) span->positions.push_back(r.sentence.tokens.size());
        r.sentence.tokens.push_back({w, pos});
      }
    };
    SpanSet rel;
    append(prefixes[rng.index(prefixes.size())], nullptr);
    append(subjects[rng.index(subjects.size())], &r.arg1);
    append(adverbs[rng.index(adverbs.size())], nullptr);
    append(relations[rng.index(relations.size())], &rel);
    append(objects[rng.index(objects.size())], &r.arg2);
    if (rng.uniform() < 0.5) append({{".", "SENT"}}, nullptr);
    r.gold_tags = tags::encode_relation(r.sentence.size(), rel);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace oretag::testing
