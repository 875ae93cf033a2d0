#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "oretag/tagspace.hpp"
#include "oretag/tensor.hpp"

// Training-corpus construction from the outputs of several independent
// extractors: agreement filtering, token alignment, tagging, splitting,
// plus vocabulary and word-vector handling.
namespace oretag::corpus {

struct PhraseTriple {
  std::string arg1;
  std::string rel;
  std::string arg2;
  friend auto operator<=>(const PhraseTriple&, const PhraseTriple&) = default;
};

struct ExtractorOutput {
  std::string sentence_id;
  std::string extractor;
  std::optional<double> confidence;
  PhraseTriple triple;
};

struct LineIssue {
  std::size_t line = 0;
  std::string message;
};

template <typename T>
struct Parsed {
  std::vector<T> items;
  std::vector<LineIssue> warnings;
};

// sentence_id \t extractor \t confidence \t arg1 \t rel \t arg2
// Confidence may be empty. Malformed lines are skipped with a warning.
Parsed<ExtractorOutput> read_extractions(std::istream& in);

// sentence_id \t surface_POS surface_POS ...
// The POS tag follows the last underscore of each token.
Parsed<Sentence> read_sentences(std::istream& in);

// Lowercase, collapse whitespace runs, strip trailing punctuation.
std::string normalize_phrase(std::string_view phrase);

struct IntersectOptions {
  std::size_t required = 3;
  // Outputs whose confidence is not strictly greater are discarded.
  double min_confidence = 0.5;
};

// Normalized triples keyed by sentence id, each list sorted.
using AgreedTriples = std::map<std::string, std::vector<PhraseTriple>>;

// Keeps a normalized triple when at least `required` distinct extractors
// produced it for the same sentence.
AgreedTriples intersect(std::span<const ExtractorOutput> outputs, const IntersectOptions& options);

// Maps phrase words to token positions, Argument1 then Relation then
// Argument2, each after the previous one. Each element takes its leftmost
// contiguous occurrence when there is one and otherwise the leftmost
// in-order subsequence; if that fails, plain leftmost subsequence matching
// is used for all three. Returns nullopt when a word cannot be placed.
std::optional<Triple> align_triple(const Sentence& sentence, const PhraseTriple& triple);

struct CorpusRecord {
  Sentence sentence;
  SpanSet arg1;
  SpanSet arg2;
  tags::TagSequence gold_tags;  // relation labels only (R-* and O)
  std::string source;

  // Relation span read back from gold_tags.
  SpanSet relation() const;
};

struct BuildStats {
  std::size_t sentences = 0;
  std::size_t sentences_with_records = 0;
  std::size_t agreed_triples = 0;
  std::size_t records = 0;
  std::size_t overlapping_records = 0;
  std::map<std::string, std::size_t> rejects;

  // Share of records whose sentence hosts at least two records.
  double overlap_proportion() const;
};

struct BuildResult {
  std::vector<CorpusRecord> records;
  BuildStats stats;
};

// One record per aligned (sentence, triple), in sentence-id order.
BuildResult build_records(std::span<const Sentence> sentences, const AgreedTriples& agreed,
                          std::size_t workers = 1);

void write_stats(std::ostream& out, const BuildStats& stats);

struct Split {
  std::vector<CorpusRecord> train;
  std::vector<CorpusRecord> validation;
};

// Sentence-level split: every record of a sentence lands on the same side.
Split split(std::span<const CorpusRecord> records, double val_fraction, std::uint64_t seed);

// Line-delimited JSON records.
void write_record(std::ostream& out, const CorpusRecord& record);
CorpusRecord parse_record(std::string_view line);
std::vector<CorpusRecord> read_corpus(std::istream& in);

class Vocab {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kPad = 1;
  static constexpr std::string_view kUnkToken = "<unk>";
  static constexpr std::string_view kPadToken = "<pad>";

  Vocab();
  std::size_t add(std::string_view token);
  // kUnk when absent.
  std::size_t index(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const { return tokens_.at(index); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Words are lowercased.
std::string word_key(std::string_view surface);

struct Vocabularies {
  Vocab words;
  Vocab pos;
};

// Built in first-seen order over the records.
Vocabularies build_vocab(std::span<const CorpusRecord> records);

struct WordVectors {
  Tensor table;  // (vocab x dim), trainable
  std::size_t from_file = 0;
  std::size_t random = 0;
};

// Text vectors: one token per line followed by its components; an optional
// "count dim" header line is skipped. Rows for tokens missing from the
// file are uniform in [-0.05, 0.05]; the PAD row is zero.
WordVectors load_word_vectors(std::istream& in, const Vocab& vocab, std::size_t dim,
                              std::uint64_t seed);
WordVectors random_word_vectors(const Vocab& vocab, std::size_t dim, std::uint64_t seed);

}  // namespace oretag::corpus
