#include "oretag/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oretag/errors.hpp"
#include "oretag/parallel.hpp"
#include "oretag/random.hpp"

namespace oretag::corpus {

namespace {

std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto at = line.find(sep, start);
    if (at == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, at - start));
    start = at + 1;
  }
}

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) out.push_back(std::move(w));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<double> parse_double(std::string_view text) {
  double v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_terminal_punct(char c) {
  return std::string_view(".,;:!?\"'").find(c) != std::string_view::npos;
}

}  // namespace

std::string normalize_phrase(std::string_view phrase) {
  std::string out;
  for (const auto& w : words_of(phrase)) {
    if (!out.empty()) out += ' ';
    out += lower(w);
  }
  while (!out.empty() && (is_terminal_punct(out.back()) || out.back() == ' ')) out.pop_back();
  return out;
}

Parsed<ExtractorOutput> read_extractions(std::istream& in) {
  Parsed<ExtractorOutput> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 6) {
      out.warnings.push_back({n, "expected 6 tab-separated fields, got " +
                                     std::to_string(fields.size())});
      continue;
    }
    ExtractorOutput rec;
    rec.sentence_id = std::string(trim(fields[0]));
    rec.extractor = lower(trim(fields[1]));
    if (rec.sentence_id.empty() || rec.extractor.empty()) {
      out.warnings.push_back({n, "missing sentence id or extractor name"});
      continue;
    }
    const auto conf = trim(fields[2]);
    if (!conf.empty()) {
      rec.confidence = parse_double(conf);
      if (!rec.confidence) {
        out.warnings.push_back({n, "unreadable confidence '" + std::string(conf) + "'"});
        continue;
      }
    }
    rec.triple = {std::string(fields[3]), std::string(fields[4]), std::string(fields[5])};
    if (normalize_phrase(rec.triple.arg1).empty() || normalize_phrase(rec.triple.rel).empty() ||
        normalize_phrase(rec.triple.arg2).empty()) {
      out.warnings.push_back({n, "empty phrase"});
      continue;
    }
    out.items.push_back(std::move(rec));
  }
  return out;
}

Parsed<Sentence> read_sentences(std::istream& in) {
  Parsed<Sentence> out;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      out.warnings.push_back({n, "missing tab after sentence id"});
      continue;
    }
    Sentence s;
    s.id = std::string(trim(std::string_view(line).substr(0, tab)));
    bool ok = !s.id.empty();
    for (const auto& item : words_of(std::string_view(line).substr(tab + 1))) {
      const auto us = item.rfind('_');
      if (us == std::string::npos || us == 0 || us + 1 == item.size()) {
        ok = false;
        break;
      }
      s.tokens.push_back({item.substr(0, us), item.substr(us + 1)});
    }
    if (!ok || s.tokens.empty()) {
      out.warnings.push_back({n, "malformed surface_POS token list"});
      continue;
    }
    if (!seen.insert(s.id).second) {
      out.warnings.push_back({n, "duplicate sentence id '" + s.id + "'"});
      continue;
    }
    out.items.push_back(std::move(s));
  }
  return out;
}

AgreedTriples intersect(std::span<const ExtractorOutput> outputs, const IntersectOptions& options) {
  if (options.required < 2) throw ConfigError("intersect: required agreement must be at least 2");
  std::map<std::pair<std::string, PhraseTriple>, std::set<std::string>> votes;
  for (const auto& o : outputs) {
    if (o.confidence && !(*o.confidence > options.min_confidence)) continue;
    PhraseTriple key{normalize_phrase(o.triple.arg1), normalize_phrase(o.triple.rel),
                     normalize_phrase(o.triple.arg2)};
    if (key.arg1.empty() || key.rel.empty() || key.arg2.empty()) continue;
    votes[{o.sentence_id, std::move(key)}].insert(lower(o.extractor));
  }
  AgreedTriples out;
  for (const auto& [key, who] : votes) {
    if (who.size() >= options.required) out[key.first].push_back(key.second);
  }
  return out;
}

namespace {

// Leftmost in-order match of `words` starting at `from`.
std::optional<SpanSet> match_subsequence(const std::vector<std::string>& tokens,
                                         const std::vector<std::string>& words,
                                         std::size_t from) {
  SpanSet span;
  std::size_t t = from;
  for (const auto& w : words) {
    while (t < tokens.size() && tokens[t] != w) ++t;
    if (t == tokens.size()) return std::nullopt;
    span.positions.push_back(t++);
  }
  return span;
}

std::optional<SpanSet> match_contiguous(const std::vector<std::string>& tokens,
                                        const std::vector<std::string>& words, std::size_t from) {
  if (words.size() > tokens.size()) return std::nullopt;
  for (std::size_t s = from; s + words.size() <= tokens.size(); ++s) {
    if (std::equal(words.begin(), words.end(), tokens.begin() + static_cast<std::ptrdiff_t>(s))) {
      SpanSet span;
      for (std::size_t k = 0; k < words.size(); ++k) span.positions.push_back(s + k);
      return span;
    }
  }
  return std::nullopt;
}

std::optional<Triple> align_with(const std::vector<std::string>& tokens,
                                 const std::array<std::vector<std::string>, 3>& phrases,
                                 bool prefer_contiguous) {
  std::array<SpanSet, 3> spans;
  std::size_t from = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::optional<SpanSet> m;
    if (prefer_contiguous) m = match_contiguous(tokens, phrases[k], from);
    if (!m) m = match_subsequence(tokens, phrases[k], from);
    if (!m) return std::nullopt;
    from = m->back() + 1;
    spans[k] = std::move(*m);
  }
  return Triple{std::move(spans[0]), std::move(spans[1]), std::move(spans[2])};
}

}  // namespace

std::optional<Triple> align_triple(const Sentence& sentence, const PhraseTriple& triple) {
  std::vector<std::string> tokens;
  tokens.reserve(sentence.size());
  for (const auto& t : sentence.tokens) tokens.push_back(lower(t.surface));
  const std::array<std::vector<std::string>, 3> phrases = {words_of(normalize_phrase(triple.arg1)),
                                                           words_of(normalize_phrase(triple.rel)),
                                                           words_of(normalize_phrase(triple.arg2))};
  for (const auto& p : phrases) {
    if (p.empty()) return std::nullopt;
  }
  auto found = align_with(tokens, phrases, true);
  if (!found) found = align_with(tokens, phrases, false);
  if (found && !tags::validate_order(sentence, *found).empty()) return std::nullopt;
  return found;
}

SpanSet CorpusRecord::relation() const {
  auto decoded = tags::decode_relation(gold_tags);
  if (!decoded.relation) throw InputError("record for sentence '" + sentence.id +
                                          "' has no well-formed relation tags");
  return *decoded.relation;
}

double BuildStats::overlap_proportion() const {
  return records == 0 ? 0.0 : static_cast<double>(overlapping_records) / static_cast<double>(records);
}

BuildResult build_records(std::span<const Sentence> sentences, const AgreedTriples& agreed,
                          std::size_t workers) {
  std::vector<const Sentence*> ordered;
  ordered.reserve(sentences.size());
  for (const auto& s : sentences) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Sentence* a, const Sentence* b) { return a->id < b->id; });

  struct Local {
    std::vector<CorpusRecord> records;
    std::map<std::string, std::size_t> rejects;
    std::size_t triples = 0;
  };
  std::vector<Local> local(ordered.size());
  parallel_for(ordered.size(), workers, [&](std::size_t i) {
    const Sentence& s = *ordered[i];
    const auto it = agreed.find(s.id);
    if (it == agreed.end()) return;
    Local& out = local[i];
    std::set<Triple> seen;
    for (const auto& phrases : it->second) {
      ++out.triples;
      auto triple = align_triple(s, phrases);
      if (!triple) {
        ++out.rejects["unalignable"];
        continue;
      }
      if (!seen.insert(*triple).second) {
        ++out.rejects["duplicate"];
        continue;
      }
      CorpusRecord rec;
      rec.sentence = s;
      rec.gold_tags = tags::encode_relation(s.size(), triple->rel);
      rec.arg1 = std::move(triple->arg1);
      rec.arg2 = std::move(triple->arg2);
      rec.source = "agreed:" + phrases.arg1 + "|" + phrases.rel + "|" + phrases.arg2;
      out.records.push_back(std::move(rec));
    }
  });

  BuildResult result;
  result.stats.sentences = sentences.size();
  std::set<std::string> known;
  for (const auto& s : sentences) known.insert(s.id);
  for (const auto& [id, triples] : agreed) {
    if (!known.count(id)) result.stats.rejects["unknown_sentence"] += triples.size();
    result.stats.agreed_triples += triples.size();
  }
  for (auto& l : local) {
    if (!l.records.empty()) ++result.stats.sentences_with_records;
    if (l.records.size() >= 2) result.stats.overlapping_records += l.records.size();
    for (const auto& [why, n] : l.rejects) result.stats.rejects[why] += n;
    for (auto& r : l.records) result.records.push_back(std::move(r));
  }
  result.stats.records = result.records.size();
  return result;
}

void write_stats(std::ostream& out, const BuildStats& stats) {
  nlohmann::json j;
  j["sentences"] = stats.sentences;
  j["sentences_with_records"] = stats.sentences_with_records;
  j["agreed_triples"] = stats.agreed_triples;
  j["records"] = stats.records;
  j["overlapping_records"] = stats.overlapping_records;
  j["overlap_proportion"] = stats.overlap_proportion();
  j["rejects"] = stats.rejects;
  out << j.dump(2) << '\n';
}

Split split(std::span<const CorpusRecord> records, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("split: validation fraction must lie strictly between 0 and 1");
  }
  std::vector<std::string> ids;
  {
    std::set<std::string> unique;
    for (const auto& r : records) unique.insert(r.sentence.id);
    ids.assign(unique.begin(), unique.end());
  }
  if (ids.size() < 2) {
    throw InputError("split: need at least 2 distinct sentences, got " + std::to_string(ids.size()));
  }
  Rng rng(seed);
  rng.shuffle(ids);
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(ids.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
  const std::set<std::string> validation(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));

  Split out;
  for (const auto& r : records) {
    (validation.count(r.sentence.id) ? out.validation : out.train).push_back(r);
  }
  return out;
}

void write_record(std::ostream& out, const CorpusRecord& record) {
  nlohmann::json j;
  j["id"] = record.sentence.id;
  auto& tokens = j["tokens"] = nlohmann::json::array();
  auto& pos = j["pos"] = nlohmann::json::array();
  for (const auto& t : record.sentence.tokens) {
    tokens.push_back(t.surface);
    pos.push_back(t.pos);
  }
  j["arg1_positions"] = record.arg1.positions;
  j["arg2_positions"] = record.arg2.positions;
  auto& tag_list = j["tags"] = nlohmann::json::array();
  for (const auto& t : record.gold_tags) tag_list.push_back(tags::to_string(t));
  j["source"] = record.source;
  out << j.dump() << '\n';
}

CorpusRecord parse_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corpus record is not valid JSON: ") + e.what());
  }
  CorpusRecord r;
  try {
    r.sentence.id = j.value("id", std::string());
    const auto tokens = j.at("tokens").get<std::vector<std::string>>();
    const auto pos = j.at("pos").get<std::vector<std::string>>();
    if (tokens.size() != pos.size() || tokens.empty()) {
      throw FormatError("corpus record: tokens and pos differ in length or are empty");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) r.sentence.tokens.push_back({tokens[i], pos[i]});
    r.arg1.positions = j.at("arg1_positions").get<std::vector<std::size_t>>();
    r.arg2.positions = j.at("arg2_positions").get<std::vector<std::size_t>>();
    for (const auto& t : j.at("tags").get<std::vector<std::string>>()) {
      r.gold_tags.push_back(tags::parse_tag(t));
    }
    r.source = j.value("source", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corpus record: ") + e.what());
  }
  if (r.gold_tags.size() != r.sentence.size()) {
    throw FormatError("corpus record: tags and tokens differ in length");
  }
  for (const auto& t : r.gold_tags) tags::relation_label_index(t);
  // Rejects overlapping or out-of-range argument spans.
  tags::argument_onehot(r.sentence, r.arg1, r.arg2);
  if (!tags::decode_relation(r.gold_tags).relation) {
    throw FormatError("corpus record: relation tags are missing or malformed");
  }
  return r;
}

std::vector<CorpusRecord> read_corpus(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const Error& e) {
      throw FormatError("corpus line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

Vocab::Vocab() {
  add(kUnkToken);
  add(kPadToken);
}

std::size_t Vocab::add(std::string_view token) {
  const auto [it, inserted] = index_.emplace(std::string(token), tokens_.size());
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::size_t Vocab::index(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

std::string word_key(std::string_view surface) { return lower(surface); }

Vocabularies build_vocab(std::span<const CorpusRecord> records) {
  Vocabularies v;
  for (const auto& r : records) {
    for (const auto& t : r.sentence.tokens) {
      v.words.add(word_key(t.surface));
      v.pos.add(t.pos);
    }
  }
  return v;
}

WordVectors random_word_vectors(const Vocab& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("word vectors: dimension must be positive");
  Rng rng(seed);
  std::vector<double> values(vocab.size() * dim);
  for (double& v : values) v = rng.uniform(-0.05, 0.05);
  std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(Vocab::kPad * dim), dim, 0.0);
  WordVectors out;
  out.table = Tensor::matrix(vocab.size(), dim, std::move(values), true);
  out.random = vocab.size() - 1;  // everything except PAD
  return out;
}

WordVectors load_word_vectors(std::istream& in, const Vocab& vocab, std::size_t dim,
                              std::uint64_t seed) {
  WordVectors out = random_word_vectors(vocab, dim, seed);
  auto values = out.table.mutable_values();
  std::vector<bool> filled(vocab.size(), false);
  std::optional<std::size_t> file_dim;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto parts = words_of(line);
    if (parts.empty()) continue;
    if (n == 1 && parts.size() == 2 && !file_dim) {
      std::size_t a = 0;
      const auto& p = parts[1];
      if (std::from_chars(p.data(), p.data() + p.size(), a).ptr == p.data() + p.size() &&
          std::all_of(parts[0].begin(), parts[0].end(),
                      [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        continue;  // "count dim" header
      }
    }
    const std::size_t d = parts.size() - 1;
    if (!file_dim) file_dim = d;
    if (d != *file_dim) {
      throw FormatError("word vectors line " + std::to_string(n) + ": " + std::to_string(d) +
                        " components, earlier lines have " + std::to_string(*file_dim));
    }
    if (d != dim) {
      throw FormatError("word vectors line " + std::to_string(n) + ": dimension " +
                        std::to_string(d) + " does not match the configured " + std::to_string(dim));
    }
    std::vector<double> row(d);
    for (std::size_t k = 0; k < d; ++k) {
      const auto v = parse_double(parts[k + 1]);
      if (!v) {
        throw FormatError("word vectors line " + std::to_string(n) + ": bad number '" +
                          parts[k + 1] + "'");
      }
      row[k] = *v;
    }
    const std::string key = word_key(parts[0]);
    if (!vocab.contains(key)) continue;
    const std::size_t idx = vocab.index(key);
    if (idx == Vocab::kPad || filled[idx]) continue;
    filled[idx] = true;
    std::copy(row.begin(), row.end(), values.begin() + static_cast<std::ptrdiff_t>(idx * dim));
  }
  out.from_file = static_cast<std::size_t>(std::count(filled.begin(), filled.end(), true));
  out.random = vocab.size() - 1 - out.from_file;
  return out;
}

}  // namespace oretag::corpus
