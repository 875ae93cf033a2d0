#include "oretag/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "oretag/errors.hpp"

namespace oretag::eval {

namespace {

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto at = line.find('\t', start);
    out.push_back(line.substr(start, at == std::string::npos ? std::string::npos : at - start));
    if (at == std::string::npos) return out;
    start = at + 1;
  }
}

// Auxiliaries, modals, negation, particles and common prepositions.
constexpr std::array<std::string_view, 48> kStopwords = {
    "be",   "am",    "is",   "are",   "was",  "were",  "been",  "being", "have",  "has",
    "had",  "do",    "does", "did",   "will", "would", "shall", "should", "can",  "could",
    "may",  "might", "must", "not",   "never", "to",   "of",    "in",    "on",    "at",
    "by",   "for",   "with", "from",  "into", "onto",  "as",    "about", "near",  "over",
    "under", "up",   "out",  "off",   "than", "that",  "the",   "a"};

bool is_stopword(const std::string& w) {
  return std::find(kStopwords.begin(), kStopwords.end(), w) != kStopwords.end();
}

std::vector<std::string> phrase_from(const Sentence& s, const SpanSet& span) {
  std::vector<std::string> out;
  for (std::size_t p : span.positions) out.push_back(s.tokens.at(p).surface);
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

Item item_for(const Sentence& s, const SpanSet& arg1, const SpanSet& rel, const SpanSet& arg2) {
  Item it;
  it.sentence_id = s.id;
  it.arg1 = join(phrase_from(s, arg1));
  it.rel = join(phrase_from(s, rel));
  it.arg2 = join(phrase_from(s, arg2));
  it.arg1_span = arg1;
  it.rel_span = rel;
  it.arg2_span = arg2;
  for (std::size_t p : rel.positions) it.rel_pos.push_back(s.tokens.at(p).pos);
  return it;
}

}  // namespace

Item from_extraction(const Sentence& sentence, const model::Extraction& extraction) {
  Item it = item_for(sentence, extraction.triple.arg1, extraction.triple.rel, extraction.triple.arg2);
  it.confidence = extraction.confidence;
  return it;
}

Item from_record(const corpus::CorpusRecord& record) {
  return item_for(record.sentence, record.arg1, record.relation(), record.arg2);
}

Criterion parse_criterion(std::string_view name) {
  if (name == "exact_span") return Criterion::kExactSpan;
  if (name == "exact_string") return Criterion::kExactString;
  if (name == "head_overlap") return Criterion::kHeadOverlap;
  throw ConfigError("unknown matching criterion '" + std::string(name) +
                    "' (expected exact_span, exact_string or head_overlap)");
}

std::string_view to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::kExactSpan: return "exact_span";
    case Criterion::kExactString: return "exact_string";
    case Criterion::kHeadOverlap: return "head_overlap";
  }
  return "?";
}

Head relation_head(const Item& item) {
  const auto words = words_of(item.rel);
  if (words.empty()) return {};
  const auto position = [&](std::size_t k) -> std::optional<std::size_t> {
    if (item.rel_span && k < item.rel_span->positions.size()) return item.rel_span->positions[k];
    return std::nullopt;
  };
  std::size_t pick = words.size() - 1;
  bool found = false;
  if (item.rel_pos.size() == words.size()) {
    for (std::size_t k = words.size(); k-- > 0;) {
      if (!item.rel_pos[k].empty() && item.rel_pos[k][0] == 'V') {
        pick = k;
        found = true;
        break;
      }
    }
  }
  if (!found) {
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (!is_stopword(corpus::normalize_phrase(words[k]))) {
        pick = k;
        break;
      }
    }
  }
  return {corpus::normalize_phrase(words[pick]), position(pick)};
}

bool match_relation(const Item& pred, const Item& gold, Criterion criterion) {
  switch (criterion) {
    case Criterion::kExactSpan:
      if (!pred.rel_span || !gold.rel_span) {
        throw InputError("exact_span matching needs relation token positions on both sides");
      }
      return pred.rel_span->positions == gold.rel_span->positions;
    case Criterion::kExactString:
      return corpus::normalize_phrase(pred.rel) == corpus::normalize_phrase(gold.rel);
    case Criterion::kHeadOverlap: {
      const Head a = relation_head(pred), b = relation_head(gold);
      if (a.word.empty() || b.word.empty()) return false;
      if (a.position && b.position) return *a.position == *b.position;
      return a.word == b.word;
    }
  }
  throw ConfigError("unknown matching criterion");
}

MetricsReport make_report(std::size_t tp, std::size_t predicted, std::size_t gold) {
  MetricsReport r;
  r.tp = tp;
  r.fp = predicted - tp;
  r.fn = gold - tp;
  r.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  r.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

std::vector<std::size_t> by_confidence(std::span<const Item> preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  return order;
}

// Greedy one-to-one matcher fed predictions in ranking order.
class Matcher {
 public:
  Matcher(std::span<const Item> golds, Criterion criterion) : golds_(golds), criterion_(criterion) {
    for (std::size_t i = 0; i < golds.size(); ++i) by_sentence_[golds[i].sentence_id].push_back(i);
    used_.assign(golds.size(), false);
  }

  bool take(const Item& pred) {
    const auto it = by_sentence_.find(pred.sentence_id);
    if (it == by_sentence_.end()) return false;
    for (std::size_t g : it->second) {
      if (!used_[g] && match_relation(pred, golds_[g], criterion_)) {
        used_[g] = true;
        return true;
      }
    }
    return false;
  }

 private:
  std::span<const Item> golds_;
  Criterion criterion_;
  std::map<std::string, std::vector<std::size_t>> by_sentence_;
  std::vector<bool> used_;
};

}  // namespace

MetricsReport prf(std::span<const Item> preds, std::span<const Item> golds, Criterion criterion) {
  Matcher matcher(golds, criterion);
  std::size_t tp = 0;
  for (std::size_t i : by_confidence(preds)) tp += matcher.take(preds[i]) ? 1 : 0;
  return make_report(tp, preds.size(), golds.size());
}

double trapezoid_auc(std::span<const CurvePoint> points) {
  if (points.empty()) return 0.0;
  double top = 0.0;
  for (const auto& p : points) top = std::max(top, p.precision);
  double area = 0.0, r0 = 0.0, p0 = top;
  for (const auto& p : points) {
    area += (p.recall - r0) * (p.precision + p0) / 2.0;
    r0 = p.recall;
    p0 = p.precision;
  }
  return area;
}

PRCurve pr_curve(std::span<const Item> preds, std::span<const Item> golds, Criterion criterion) {
  PRCurve curve;
  for (const auto& p : preds) {
    if (!std::isfinite(p.confidence)) throw InputError("pr_curve: non-finite confidence");
  }
  const auto order = by_confidence(preds);
  Matcher matcher(golds, criterion);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    tp += matcher.take(preds[order[k]]) ? 1 : 0;
    const bool last_of_group =
        k + 1 == order.size() || preds[order[k + 1]].confidence != preds[order[k]].confidence;
    if (!last_of_group) continue;
    const auto r = make_report(tp, k + 1, golds.size());
    curve.points.push_back({preds[order[k]].confidence, r.recall, r.precision});
  }
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissed: return "missed";
    case ErrorKind::kSchemeViolation: return "scheme_violation";
    case ErrorKind::kWrongStart: return "wrong_start";
    case ErrorKind::kWrongEnd: return "wrong_end";
  }
  return "?";
}

std::optional<ErrorKind> classify(const Attempt& a, Criterion criterion) {
  if (a.prediction && match_relation(*a.prediction, a.gold, criterion)) return std::nullopt;
  if (a.status == tags::DecodeStatus::kSchemeViolation) return ErrorKind::kSchemeViolation;
  if (!a.prediction) return ErrorKind::kMissed;
  const Item& p = *a.prediction;
  bool same_start;
  if (p.rel_span && a.gold.rel_span && !p.rel_span->empty() && !a.gold.rel_span->empty()) {
    same_start = p.rel_span->front() == a.gold.rel_span->front();
  } else {
    const auto pw = words_of(corpus::normalize_phrase(p.rel));
    const auto gw = words_of(corpus::normalize_phrase(a.gold.rel));
    same_start = !pw.empty() && !gw.empty() && pw.front() == gw.front();
  }
  return same_start ? ErrorKind::kWrongEnd : ErrorKind::kWrongStart;
}

ErrorBreakdown categorize_errors(std::span<const Attempt> attempts, Criterion criterion) {
  ErrorBreakdown b;
  for (const auto& a : attempts) {
    const auto kind = classify(a, criterion);
    if (!kind) {
      ++b.correct;
      continue;
    }
    switch (*kind) {
      case ErrorKind::kMissed: ++b.missed; break;
      case ErrorKind::kSchemeViolation: ++b.scheme_violation; break;
      case ErrorKind::kWrongStart: ++b.wrong_start; break;
      case ErrorKind::kWrongEnd: ++b.wrong_end; break;
    }
  }
  return b;
}

namespace {

template <typename T, typename Id>
Subset<T> overlap_by(std::span<const T> items, Id id) {
  std::map<std::string, std::size_t> counts;
  for (const auto& it : items) ++counts[id(it)];
  Subset<T> out;
  for (const auto& it : items) {
    if (counts[id(it)] >= 2) out.items.push_back(it);
  }
  out.proportion = items.empty() ? 0.0
                                 : static_cast<double>(out.items.size()) / static_cast<double>(items.size());
  return out;
}

}  // namespace

Subset<corpus::CorpusRecord> overlap_subset(std::span<const corpus::CorpusRecord> records) {
  return overlap_by(records, [](const corpus::CorpusRecord& r) { return r.sentence.id; });
}

Subset<Item> overlap_subset(std::span<const Item> golds) {
  return overlap_by(golds, [](const Item& i) { return i.sentence_id; });
}

std::string format_positions(const SpanSet& span) {
  std::string out;
  for (std::size_t p : span.positions) {
    if (!out.empty()) out += ',';
    out += std::to_string(p);
  }
  return out;
}

SpanSet parse_positions(std::string_view text) {
  SpanSet span;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    const auto part = text.substr(start, end - start);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
      throw FormatError("bad token position list '" + std::string(text) + "'");
    }
    span.positions.push_back(v);
    start = end + 1;
  }
  return span;
}

std::vector<Item> read_items(std::istream& in) {
  std::vector<Item> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto f = split_tabs(line);
    const auto where = "line " + std::to_string(n) + ": ";
    if (f.size() != 5 && f.size() != 8) {
      throw FormatError(where + "expected 5 or 8 tab-separated fields, got " + std::to_string(f.size()));
    }
    Item it;
    it.sentence_id = f[0];
    double c = 1.0;
    if (!f[1].empty()) {
      const auto [ptr, ec] = std::from_chars(f[1].data(), f[1].data() + f[1].size(), c);
      if (ec != std::errc{} || ptr != f[1].data() + f[1].size() || !std::isfinite(c)) {
        throw FormatError(where + "bad confidence '" + f[1] + "'");
      }
    }
    it.confidence = c;
    it.arg1 = f[2];
    it.rel = f[3];
    it.arg2 = f[4];
    if (corpus::normalize_phrase(it.rel).empty()) throw FormatError(where + "empty relation");
    if (f.size() == 8) {
      try {
        it.arg1_span = parse_positions(f[5]);
        it.rel_span = parse_positions(f[6]);
        it.arg2_span = parse_positions(f[7]);
      } catch (const FormatError& e) {
        throw FormatError(where + e.what());
      }
    }
    out.push_back(std::move(it));
  }
  return out;
}

void write_item(std::ostream& out, const Item& item) {
  char conf[32];
  const auto [end, ec] = std::to_chars(conf, conf + sizeof conf, item.confidence);
  out << item.sentence_id << '\t' << std::string_view(conf, static_cast<std::size_t>(end - conf)) << '\t'
      << item.arg1 << '\t' << item.rel << '\t' << item.arg2;
  if (item.arg1_span && item.rel_span && item.arg2_span) {
    out << '\t' << format_positions(*item.arg1_span) << '\t' << format_positions(*item.rel_span)
        << '\t' << format_positions(*item.arg2_span);
  }
  out << '\n';
}

}  // namespace oretag::eval
