// Command-line front end: build-corpus, train, predict, evaluate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oretag/corpus.hpp"
#include "oretag/errors.hpp"
#include "oretag/eval.hpp"
#include "oretag/model.hpp"
#include "oretag/parallel.hpp"

namespace fs = std::filesystem;
using namespace oretag;

namespace {

bool g_quiet = false;

void note(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path + "'");
  return in;
}

// Written to a sibling temp file and renamed on commit, so a failed run
// never leaves a partial artifact under the final name.
class AtomicFile {
 public:
  explicit AtomicFile(std::string path, std::ios::openmode mode = std::ios::out)
      : path_(std::move(path)), tmp_(path_ + ".partial") {
    out_.open(tmp_, mode | std::ios::trunc);
    if (!out_) throw Error("cannot write '" + path_ + "'");
  }
  ~AtomicFile() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      fs::remove(tmp_, ec);
    }
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.close();
    if (!out_) throw Error("failed while writing '" + path_ + "'");
    fs::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::string path_;
  std::string tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

std::string dashed(std::string key) {
  for (char& c : key)
    if (c == '_') c = '-';
  return key;
}

// ---------------------------------------------------------------- build-corpus

struct BuildArgs {
  std::string extractions, sentences, out, stats;
  std::size_t min_agree = 3;
  double min_conf = 0.5;
  std::size_t workers = 1;
};

int run_build(const BuildArgs& a) {
  auto ex_in = open_input(a.extractions);
  auto sent_in = open_input(a.sentences);
  const auto extractions = corpus::read_extractions(ex_in);
  for (const auto& w : extractions.warnings) {
    std::cerr << "warning: " << a.extractions << ":" << w.line << ": " << w.message << '\n';
  }
  const auto sentences = corpus::read_sentences(sent_in);
  for (const auto& w : sentences.warnings) {
    std::cerr << "warning: " << a.sentences << ":" << w.line << ": " << w.message << '\n';
  }
  const auto agreed = corpus::intersect(extractions.items, {a.min_agree, a.min_conf});
  const auto built = corpus::build_records(sentences.items, agreed, a.workers);

  AtomicFile out(a.out);
  for (const auto& r : built.records) corpus::write_record(out.stream(), r);
  AtomicFile stats(a.stats.empty() ? a.out + ".stats.json" : a.stats);
  corpus::write_stats(stats.stream(), built.stats);
  out.commit();
  stats.commit();
  note("wrote " + std::to_string(built.records.size()) + " records from " +
       std::to_string(sentences.items.size()) + " sentences");
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string corpus_path, checkpoint, config_file, val_path, vectors, log;
  std::string preset = "full";
  std::optional<std::uint64_t> seed;
  double val_fraction = 0.172;
  std::size_t workers = 1;
  std::map<std::string, std::string> overrides;
};

std::vector<corpus::CorpusRecord> read_corpus_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return corpus::read_corpus(in);
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

int run_train(const TrainArgs& a) {
  model::ModelConfig cfg;
  if (a.preset == "desk") {
    cfg = model::ModelConfig::desk_scale();
  } else if (a.preset == "full") {
    cfg = model::ModelConfig::full_scale();
  } else {
    throw ConfigError("unknown preset '" + a.preset + "' (expected full or desk)");
  }
  if (!a.config_file.empty()) {
    auto in = open_input(a.config_file);
    model::apply_config(cfg, in);
  }
  for (const auto& [key, value] : a.overrides) cfg.set(key, value);
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();

  const auto records = read_corpus_file(a.corpus_path);
  std::vector<corpus::CorpusRecord> train_set, val_set;
  if (!a.val_path.empty()) {
    train_set = records;
    val_set = read_corpus_file(a.val_path);
  } else {
    auto parts = corpus::split(records, a.val_fraction, cfg.seed);
    train_set = std::move(parts.train);
    val_set = std::move(parts.validation);
  }
  auto vocab = corpus::build_vocab(train_set);
  std::optional<Tensor> table;
  if (!a.vectors.empty()) {
    auto in = open_input(a.vectors);
    auto wv = corpus::load_word_vectors(in, vocab.words, cfg.word_dim, cfg.seed);
    note("word vectors: " + std::to_string(wv.from_file) + " rows from file, " +
         std::to_string(wv.random) + " random");
    table = wv.table;
  }
  if (vocab.pos.size() > cfg.pos_dim) {
    std::cerr << "warning: " << vocab.pos.size() << " POS symbols exceed pos_dim " << cfg.pos_dim
              << "; the extra tags share the unknown slot\n";
  }
  note("training on " + std::to_string(train_set.size()) + " records, validating on " +
       std::to_string(val_set.size()));

  auto m = model::Model::create(cfg, std::move(vocab), table);
  AtomicFile log(a.log.empty() ? a.checkpoint + ".log.jsonl" : a.log);
  model::TrainOptions opt;
  opt.workers = a.workers;
  opt.on_epoch = [&](const model::EpochRecord& r) {
    log.stream() << model::to_json_line(r) << '\n';
    log.stream().flush();
    if (!g_quiet) {
      std::cerr << "epoch " << r.epoch << "  train " << std::fixed << std::setprecision(4) << r.train_loss
                << "  val " << r.val_loss << "  P " << r.precision << "  R " << r.recall << "  F1 "
                << r.f1 << "  lr " << std::defaultfloat << r.lr << '\n';
    }
    return true;
  };
  const auto result = model::train(m, train_set, val_set, opt);
  AtomicFile ckpt(a.checkpoint, std::ios::out | std::ios::binary);
  model::save(m, ckpt.stream());
  ckpt.commit();
  log.commit();
  note("best epoch " + std::to_string(result.best_epoch) + "; checkpoint written to " + a.checkpoint);
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint, sentences, pairs, out;
  std::size_t workers = 1;
};

struct PairLine {
  std::string sentence_id;
  model::CandidatePair pair;
};

std::vector<PairLine> read_pairs(const std::string& path) {
  auto in = open_input(path);
  std::vector<PairLine> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, '\t');) f.push_back(part);
    if (f.size() != 3) {
      throw FormatError(path + ":" + std::to_string(n) + ": expected sentence_id, arg1 positions, arg2 positions");
    }
    try {
      out.push_back({f[0], {eval::parse_positions(f[1]), eval::parse_positions(f[2])}});
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

int run_predict(const PredictArgs& a) {
  const auto m = model::load(a.checkpoint);
  auto sent_in = open_input(a.sentences);
  const auto parsed = corpus::read_sentences(sent_in);
  for (const auto& w : parsed.warnings) {
    std::cerr << "warning: " << a.sentences << ":" << w.line << ": " << w.message << '\n';
  }
  std::map<std::string, const Sentence*> by_id;
  for (const auto& s : parsed.items) by_id[s.id] = &s;
  const auto pairs = read_pairs(a.pairs);

  // Group pair indices by sentence, in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!by_id.count(pairs[i].sentence_id)) {
      throw InputError("pairs file names unknown sentence '" + pairs[i].sentence_id + "'");
    }
    auto& g = groups[pairs[i].sentence_id];
    if (g.empty()) order.push_back(pairs[i].sentence_id);
    g.push_back(i);
  }
  std::vector<model::Prediction> results(pairs.size());
  parallel_for(order.size(), a.workers, [&](std::size_t k) {
    const Sentence& s = *by_id.at(order[k]);
    for (std::size_t i : groups.at(order[k])) results[i] = model::predict_one(m, s, pairs[i].pair);
  });

  AtomicFile out(a.out);
  AtomicFile rejects(a.out + ".rejects");
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& r = results[i];
    if (r.extraction) {
      eval::write_item(out.stream(), eval::from_extraction(*by_id.at(pairs[i].sentence_id), *r.extraction));
      ++emitted;
    } else {
      rejects.stream() << pairs[i].sentence_id << '\t' << eval::format_positions(r.pair.arg1) << '\t'
                       << eval::format_positions(r.pair.arg2) << '\t' << tags::to_string(r.status) << '\n';
    }
  }
  out.commit();
  rejects.commit();
  note(std::to_string(emitted) + " extractions, " + std::to_string(pairs.size() - emitted) + " rejected");
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvalArgs {
  std::string preds, gold, criterion = "exact_string", pr_curve, rejects;
  bool errors = false;
};

std::vector<eval::Item> read_gold(const std::string& path) {
  if (fs::path(path).extension() == ".jsonl") {
    std::vector<eval::Item> out;
    for (const auto& r : read_corpus_file(path)) out.push_back(eval::from_record(r));
    return out;
  }
  auto in = open_input(path);
  try {
    return eval::read_items(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

struct Reject {
  std::string sentence_id;
  SpanSet arg1, arg2;
  tags::DecodeStatus status;
};

std::vector<Reject> read_rejects(const std::string& path) {
  std::vector<Reject> out;
  auto in = open_input(path);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, '\t');) f.push_back(part);
    if (f.size() != 4) throw FormatError(path + ":" + std::to_string(n) + ": expected 4 fields");
    const auto status = f[3] == "scheme_violation" ? tags::DecodeStatus::kSchemeViolation
                                                   : tags::DecodeStatus::kMissing;
    out.push_back({f[0], eval::parse_positions(f[1]), eval::parse_positions(f[2]), status});
  }
  return out;
}

bool same_pair(const eval::Item& a, const eval::Item& b) {
  if (a.sentence_id != b.sentence_id) return false;
  if (a.arg1_span && a.arg2_span && b.arg1_span && b.arg2_span) {
    return *a.arg1_span == *b.arg1_span && *a.arg2_span == *b.arg2_span;
  }
  return corpus::normalize_phrase(a.arg1) == corpus::normalize_phrase(b.arg1) &&
         corpus::normalize_phrase(a.arg2) == corpus::normalize_phrase(b.arg2);
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

std::string exact(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

int run_evaluate(const EvalArgs& a) {
  const auto criterion = eval::parse_criterion(a.criterion);
  auto pred_in = open_input(a.preds);
  std::vector<eval::Item> preds;
  try {
    preds = eval::read_items(pred_in);
  } catch (const FormatError& e) {
    throw FormatError(a.preds + ": " + e.what());
  }
  const auto golds = read_gold(a.gold);
  const auto report = eval::prf(preds, golds, criterion);
  const auto curve = eval::pr_curve(preds, golds, criterion);

  std::vector<std::pair<std::string, std::string>> rows = {
      {"criterion", std::string(eval::to_string(criterion))},
      {"predictions", std::to_string(preds.size())},
      {"gold", std::to_string(golds.size())},
      {"tp", std::to_string(report.tp)},
      {"fp", std::to_string(report.fp)},
      {"fn", std::to_string(report.fn)},
      {"precision", fixed(report.precision)},
      {"recall", fixed(report.recall)},
      {"f1", fixed(report.f1)},
      {"auc", fixed(curve.auc)},
  };
  std::vector<std::pair<std::string, std::string>> kv = {
      {"criterion", std::string(eval::to_string(criterion))},
      {"tp", std::to_string(report.tp)},
      {"fp", std::to_string(report.fp)},
      {"fn", std::to_string(report.fn)},
      {"precision", exact(report.precision)},
      {"recall", exact(report.recall)},
      {"f1", exact(report.f1)},
      {"auc", exact(curve.auc)},
  };

  if (a.errors) {
    std::vector<Reject> rejects;
    const std::string rejects_path = a.rejects.empty() ? a.preds + ".rejects" : a.rejects;
    if (fs::exists(rejects_path)) rejects = read_rejects(rejects_path);
    std::vector<eval::Attempt> attempts;
    for (const auto& g : golds) {
      eval::Attempt at{g, std::nullopt, tags::DecodeStatus::kMissing};
      for (const auto& p : preds) {
        if (same_pair(p, g)) {
          at.prediction = p;
          at.status = tags::DecodeStatus::kOk;
          break;
        }
      }
      if (!at.prediction && g.arg1_span && g.arg2_span) {
        for (const auto& r : rejects) {
          if (r.sentence_id == g.sentence_id && r.arg1 == *g.arg1_span && r.arg2 == *g.arg2_span) {
            at.status = r.status;
            break;
          }
        }
      }
      attempts.push_back(std::move(at));
    }
    const auto b = eval::categorize_errors(attempts, criterion);
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::size_t>>{
             {"missed", b.missed},
             {"scheme_violation", b.scheme_violation},
             {"wrong_start", b.wrong_start},
             {"wrong_end", b.wrong_end}}) {
      rows.emplace_back("errors." + k, std::to_string(v));
      kv.emplace_back("errors." + k, std::to_string(v));
    }
  }

  if (!a.pr_curve.empty()) {
    AtomicFile out(a.pr_curve);
    out.stream() << "threshold\trecall\tprecision\n";
    for (const auto& p : curve.points) {
      out.stream() << exact(p.threshold) << '\t' << exact(p.recall) << '\t' << exact(p.precision) << '\n';
    }
    out.commit();
  }

  std::size_t width = 0;
  for (const auto& [k, v] : rows) width = std::max(width, k.size());
  for (const auto& [k, v] : rows) std::cout << std::left << std::setw(static_cast<int>(width + 2)) << k << v << '\n';
  std::cout << '\n';
  for (const auto& [k, v] : kv) std::cout << k << '=' << v << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open relation extraction by sequence tagging"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress messages");

  BuildArgs build;
  auto* b = app.add_subcommand("build-corpus", "Intersect extractor outputs into a tagged corpus");
  b->add_option("extractions", build.extractions, "Extractor outputs (tab-separated)")->required();
  b->add_option("sentences", build.sentences, "Sentences as id<TAB>surface_POS ...")->required();
  b->add_option("out", build.out, "Corpus output (JSON lines)")->required();
  b->add_option("--min-agree", build.min_agree, "Distinct extractors that must agree")->capture_default_str();
  b->add_option("--min-conf", build.min_conf, "Drop outputs whose confidence is not above this")
      ->capture_default_str();
  b->add_option("--stats", build.stats, "Stats report path (default <out>.stats.json)");
  b->add_option("--workers", build.workers, "Worker threads")->capture_default_str();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a tagger on a corpus");
  t->add_option("corpus", train.corpus_path, "Training corpus (JSON lines)")->required();
  t->add_option("checkpoint", train.checkpoint, "Checkpoint output")->required();
  t->add_option("--config", train.config_file, "key = value config file");
  t->add_option("--preset", train.preset, "Base configuration: full or desk")->capture_default_str();
  t->add_option("--seed", train.seed, "Seed for every random choice");
  t->add_option("--val", train.val_path, "Separate validation corpus (otherwise split)");
  t->add_option("--val-fraction", train.val_fraction, "Validation share of sentences")->capture_default_str();
  t->add_option("--vectors", train.vectors, "Text word vectors");
  t->add_option("--log", train.log, "Metrics log (default <checkpoint>.log.jsonl)");
  t->add_option("--workers", train.workers, "Worker threads for validation")->capture_default_str();
  std::map<std::string, std::string> raw_overrides;
  for (const auto& key : model::ModelConfig::keys()) {
    if (key == "seed") continue;
    t->add_option_function<std::string>(
        "--" + dashed(key), [&raw_overrides, key](const std::string& v) { raw_overrides[key] = v; },
        "Override " + key);
  }

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Tag relations for candidate argument pairs");
  p->add_option("checkpoint", predict.checkpoint, "Trained checkpoint")->required();
  p->add_option("sentences", predict.sentences, "Sentences as id<TAB>surface_POS ...")->required();
  p->add_option("pairs", predict.pairs, "id<TAB>arg1 positions<TAB>arg2 positions")->required();
  p->add_option("out", predict.out, "Extractions output; rejects go to <out>.rejects")->required();
  p->add_option("--workers", predict.workers, "Worker threads")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score extractions against gold");
  e->add_option("predictions", ev.preds, "Extractions (tab-separated)")->required();
  e->add_option("gold", ev.gold, "Gold triples (tab-separated, or a .jsonl corpus)")->required();
  e->add_option("--criterion", ev.criterion, "exact_span, exact_string or head_overlap")
      ->capture_default_str();
  e->add_option("--pr-curve", ev.pr_curve, "Write threshold/recall/precision TSV here");
  e->add_flag("--errors", ev.errors, "Break unmatched gold items down by error type");
  e->add_option("--rejects", ev.rejects, "Rejects sidecar (default <predictions>.rejects)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (b->parsed()) return run_build(build);
    if (t->parsed()) {
      train.overrides = raw_overrides;
      return run_train(train);
    }
    if (p->parsed()) return run_predict(predict);
    if (e->parsed()) return run_evaluate(ev);
  } catch (const model::TrainingDiverged& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
