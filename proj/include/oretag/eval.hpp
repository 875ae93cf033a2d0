#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oretag/corpus.hpp"
#include "oretag/model.hpp"
#include "oretag/tagspace.hpp"

// Scoring of extracted relations against gold triples. Only the relation
// phrase decides correctness; arguments are carried along for reporting.
namespace oretag::eval {

// One predicted or gold triple. Spans are present when the producer knew
// token positions; phrase text is always present.
struct Item {
  std::string sentence_id;
  double confidence = 1.0;
  std::string arg1;
  std::string rel;
  std::string arg2;
  std::optional<SpanSet> arg1_span;
  std::optional<SpanSet> rel_span;
  std::optional<SpanSet> arg2_span;
  std::vector<std::string> rel_pos;  // POS of each relation word, if known
};

Item from_extraction(const Sentence& sentence, const model::Extraction& extraction);
Item from_record(const corpus::CorpusRecord& record);

enum class Criterion { kExactSpan, kExactString, kHeadOverlap };

Criterion parse_criterion(std::string_view name);
std::string_view to_string(Criterion criterion);

// Head word of a relation: the last verb when POS tags are known,
// otherwise the first word outside a list of auxiliaries, modals,
// particles and prepositions, otherwise the last word.
struct Head {
  std::string word;
  std::optional<std::size_t> position;
};
Head relation_head(const Item& item);

// Both items must come from the same sentence. kExactSpan needs rel_span
// on both sides.
bool match_relation(const Item& pred, const Item& gold, Criterion criterion);

struct MetricsReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

MetricsReport make_report(std::size_t tp, std::size_t predicted, std::size_t gold);

// Predictions are visited by descending confidence (ties keep input
// order); each takes the first unmatched gold of its sentence it matches.
MetricsReport prf(std::span<const Item> preds, std::span<const Item> golds, Criterion criterion);

struct CurvePoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<CurvePoint> points;  // one per distinct confidence, descending
  double auc = 0.0;
};

// Trapezoidal area over recall with (0, max precision) prepended.
PRCurve pr_curve(std::span<const Item> preds, std::span<const Item> golds, Criterion criterion);
double trapezoid_auc(std::span<const CurvePoint> points);

enum class ErrorKind { kMissed, kSchemeViolation, kWrongStart, kWrongEnd };
std::string_view to_string(ErrorKind kind);

// What the model did for one gold item.
struct Attempt {
  Item gold;
  std::optional<Item> prediction;
  tags::DecodeStatus status = tags::DecodeStatus::kMissing;
};

struct ErrorBreakdown {
  std::size_t correct = 0;
  std::size_t missed = 0;
  std::size_t scheme_violation = 0;
  std::size_t wrong_start = 0;
  std::size_t wrong_end = 0;
  std::size_t errors() const { return missed + scheme_violation + wrong_start + wrong_end; }
};

// nullopt when the attempt is credited as correct.
std::optional<ErrorKind> classify(const Attempt& attempt, Criterion criterion);
ErrorBreakdown categorize_errors(std::span<const Attempt> attempts,
                                 Criterion criterion = Criterion::kExactSpan);

template <typename T>
struct Subset {
  std::vector<T> items;
  double proportion = 0.0;  // items kept / items given
};

// Records whose sentence hosts at least two gold triples.
Subset<corpus::CorpusRecord> overlap_subset(std::span<const corpus::CorpusRecord> records);
Subset<Item> overlap_subset(std::span<const Item> golds);

// sentence_id \t confidence \t arg1 \t rel \t arg2 [\t arg1_pos \t rel_pos \t arg2_pos]
// Positions are comma-separated token indices.
std::vector<Item> read_items(std::istream& in);
void write_item(std::ostream& out, const Item& item);

std::string format_positions(const SpanSet& span);
SpanSet parse_positions(std::string_view text);

}  // namespace oretag::eval
