#include "oretag/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "oretag/crf.hpp"
#include "oretag/errors.hpp"
#include "oretag/ops.hpp"
#include "oretag/parallel.hpp"

namespace oretag::model {

namespace {

template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("word_dim", c.word_dim);
  f("pos_dim", c.pos_dim);
  f("arg_dim", c.arg_dim);
  f("hidden", c.hidden);
  f("conv_filters", c.conv_filters);
  f("conv_depth", c.conv_depth);
  f("attention_dim", c.attention_dim);
  f("dropout_p", c.dropout_p);
  f("batch_size", c.batch_size);
  f("lr", c.lr);
  f("lr_factor", c.lr_factor);
  f("lr_patience", c.lr_patience);
  f("early_stop_patience", c.early_stop_patience);
  f("max_epochs", c.max_epochs);
  f("seed", c.seed);
  f("master_input_complement", c.master_input_complement);
  f("labels", c.labels);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
  const auto fail = [&] {
    return ConfigError("config: bad value '" + std::string(text) + "' for " + std::string(key));
  };
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw fail();
  } else {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) throw fail();
    return v;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ModelConfig ModelConfig::full_scale() { return ModelConfig{}; }

ModelConfig ModelConfig::desk_scale() {
  ModelConfig c;
  c.word_dim = 50;
  c.hidden = 32;
  c.conv_filters = 32;
  c.attention_dim = 32;
  c.dropout_p = 0.1;
  c.batch_size = 8;
  c.lr = 0.005;
  c.early_stop_patience = 10;
  c.max_epochs = 200;
  return c;
}

void ModelConfig::validate() const {
  visit_fields(*this, [](const char* name, const auto& v) {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (v == 0 && std::string_view(name) != "seed") {
        throw ConfigError(std::string("config: ") + name + " must be positive");
      }
    }
  });
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("config: dropout_p must lie in [0, 1)");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("config: lr must be positive");
  if (!(lr_factor > 0.0 && lr_factor <= 1.0)) throw ConfigError("config: lr_factor must lie in (0, 1]");
  if (arg_dim != tags::kArgSymbols) {
    throw ConfigError("config: arg_dim must be " + std::to_string(tags::kArgSymbols));
  }
  if (labels != tags::kRelationLabels) {
    throw ConfigError("config: labels must be " + std::to_string(tags::kRelationLabels));
  }
  if (pos_dim < 2) throw ConfigError("config: pos_dim must leave room for UNK and PAD");
}

void ModelConfig::set(std::string_view key, std::string_view value) {
  bool found = false;
  value = trim(value);
  visit_fields(*this, [&](const char* name, auto& field) {
    if (key != name) return;
    found = true;
    field = parse_value<std::decay_t<decltype(field)>>(key, value);
  });
  if (!found) throw ConfigError("config: unknown key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> ModelConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  visit_fields(*this, [&](const char* name, const auto& v) {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, bool>) {
      out.emplace_back(name, v ? "true" : "false");
    } else if constexpr (std::is_same_v<T, double>) {
      out.emplace_back(name, format_double(v));
    } else {
      out.emplace_back(name, std::to_string(v));
    }
  });
  return out;
}

std::vector<std::string> ModelConfig::keys() {
  std::vector<std::string> out;
  for (auto& [k, v] : ModelConfig{}.entries()) out.push_back(k);
  return out;
}

void apply_config(ModelConfig& config, std::istream& in) {
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    }
    config.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

Params Params::init(const ModelConfig& config, std::size_t vocab_size, Rng& rng,
                    std::optional<Tensor> word_table) {
  config.validate();
  if (vocab_size < 2) throw ConfigError("model: vocabulary must hold at least UNK and PAD");
  Params p;
  if (word_table) {
    if (word_table->rank() != 2 || word_table->rows() != vocab_size ||
        word_table->cols() != config.word_dim) {
      throw ShapeError("model: word table " + shape_string(word_table->shape()) + " does not match " +
                       shape_string({vocab_size, config.word_dim}));
    }
    p.words = *word_table;
    p.words.set_requires_grad(true);
  } else {
    p.words = Tensor::zeros({vocab_size, config.word_dim}, true);
    auto w = p.words.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = i / config.word_dim == corpus::Vocab::kPad ? 0.0 : rng.uniform(-0.05, 0.05);
    }
  }
  p.forward = onlstm::Params::init(config.input_dim(), config.hidden, rng);
  p.backward = onlstm::Params::init(config.input_dim(), config.hidden, rng);
  p.forward.master_input_complement = config.master_input_complement;
  p.backward.master_input_complement = config.master_input_complement;
  p.attention = dual::AttentionParams::init(2 * config.hidden, 2 * config.word_dim,
                                            config.attention_dim, rng);
  p.conv = dual::ConvStackParams::init(config.input_dim(), config.conv_filters, config.conv_depth, rng);
  const std::size_t fused = 2 * config.hidden + config.conv_filters;
  const double bound = std::sqrt(6.0 / static_cast<double>(fused + config.labels));
  p.emission_weights = Tensor::zeros({fused, config.labels}, true);
  for (double& v : p.emission_weights.mutable_values()) v = rng.uniform(-bound, bound);
  p.emission_bias = Tensor::zeros({config.labels}, true);
  p.transitions = crf::make_transitions(config.labels, true);
  return p;
}

std::vector<std::pair<std::string, Tensor>> Params::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  out.emplace_back("words", words);
  out.emplace_back("forward.input", forward.input_weights);
  out.emplace_back("forward.recurrent", forward.recurrent_weights);
  out.emplace_back("forward.bias", forward.bias);
  out.emplace_back("backward.input", backward.input_weights);
  out.emplace_back("backward.recurrent", backward.recurrent_weights);
  out.emplace_back("backward.bias", backward.bias);
  out.emplace_back("attention.state", attention.state_weights);
  out.emplace_back("attention.pair", attention.pair_weights);
  out.emplace_back("attention.projection", attention.projection);
  for (std::size_t i = 0; i < conv.layers.size(); ++i) {
    out.emplace_back("conv." + std::to_string(i) + ".filters", conv.layers[i].filters);
    out.emplace_back("conv." + std::to_string(i) + ".bias", conv.layers[i].bias);
  }
  out.emplace_back("emission.weights", emission_weights);
  out.emplace_back("emission.bias", emission_bias);
  out.emplace_back("transitions", transitions);
  return out;
}

std::vector<Tensor> Params::leaves() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

Model Model::create(const ModelConfig& config, corpus::Vocabularies vocab,
                    std::optional<Tensor> word_table) {
  Rng rng(mix(config.seed, 0x1d));
  Model m{config, std::move(vocab), {}};
  m.params = Params::init(config, m.vocab.words.size(), rng, std::move(word_table));
  return m;
}

Encoded encode(const Model& model, const Sentence& sentence, const SpanSet& arg1,
               const SpanSet& arg2, std::size_t padded_length) {
  if (sentence.size() == 0) throw InputError("encode: sentence '" + sentence.id + "' is empty");
  Encoded e;
  e.id = sentence.id;
  e.length = sentence.size();
  const std::size_t total = std::max(padded_length, e.length);
  e.words.assign(total, corpus::Vocab::kPad);
  e.pos.assign(total, corpus::Vocab::kPad);
  for (std::size_t t = 0; t < e.length; ++t) {
    e.words[t] = model.vocab.words.index(corpus::word_key(sentence.tokens[t].surface));
    std::size_t p = model.vocab.pos.index(sentence.tokens[t].pos);
    e.pos[t] = p < model.config.pos_dim ? p : corpus::Vocab::kUnk;
  }
  e.args = tags::argument_onehot(sentence, arg1, arg2, total);
  e.arg1 = arg1;
  e.arg2 = arg2;
  return e;
}

Encoded encode(const Model& model, const corpus::CorpusRecord& record, std::size_t padded_length) {
  if (record.gold_tags.size() != record.sentence.size()) {
    throw InputError("encode: record '" + record.sentence.id + "' has " +
                     std::to_string(record.gold_tags.size()) + " tags for " +
                     std::to_string(record.sentence.size()) + " tokens");
  }
  Encoded e = encode(model, record.sentence, record.arg1, record.arg2, padded_length);
  for (const auto& tag : record.gold_tags) e.gold.push_back(tags::relation_label_index(tag));
  return e;
}

Encoded Batch::example(std::size_t i) const {
  if (i >= size()) throw InputError("batch: example index out of range");
  Encoded e;
  e.id = ids[i];
  e.length = lengths[i];
  const auto base = static_cast<std::ptrdiff_t>(i * max_length);
  const auto end = base + static_cast<std::ptrdiff_t>(max_length);
  e.words.assign(words.begin() + base, words.begin() + end);
  e.pos.assign(pos.begin() + base, pos.begin() + end);
  e.args.assign(args.begin() + base, args.begin() + end);
  e.gold.assign(gold.begin() + base, gold.begin() + base + static_cast<std::ptrdiff_t>(e.length));
  e.arg1 = arg1[i];
  e.arg2 = arg2[i];
  return e;
}

Batch make_batch(std::span<const Encoded> examples) {
  Batch b;
  for (const auto& e : examples) b.max_length = std::max(b.max_length, e.length);
  const std::size_t n = examples.size() * b.max_length;
  b.words.assign(n, corpus::Vocab::kPad);
  b.pos.assign(n, corpus::Vocab::kPad);
  b.args.assign(n, tags::ArgSymbol::kPad);
  b.gold.assign(n, tags::kOutsideLabel);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    const std::size_t base = i * b.max_length;
    std::copy_n(e.words.begin(), e.length, b.words.begin() + static_cast<std::ptrdiff_t>(base));
    std::copy_n(e.pos.begin(), e.length, b.pos.begin() + static_cast<std::ptrdiff_t>(base));
    std::copy_n(e.args.begin(), e.length, b.args.begin() + static_cast<std::ptrdiff_t>(base));
    std::copy(e.gold.begin(), e.gold.end(), b.gold.begin() + static_cast<std::ptrdiff_t>(base));
    b.lengths.push_back(e.length);
    b.arg1.push_back(e.arg1);
    b.arg2.push_back(e.arg2);
    b.ids.push_back(e.id);
  }
  return b;
}

Tensor emissions(const Model& model, const Encoded& example, const ForwardOptions& options) {
  using namespace ops;
  const auto& cfg = model.config;
  const auto& p = model.params;
  const std::size_t T = example.length;
  if (T == 0) throw InputError("forward: example '" + example.id + "' has no tokens");
  if (example.words.size() < T || example.pos.size() < T || example.args.size() < T) {
    throw InputError("forward: example '" + example.id + "' is shorter than its length");
  }

  const Tensor embedded = gather_rows(p.words, std::span(example.words.data(), T));
  const std::size_t onehot_dim = cfg.arg_dim + cfg.pos_dim;
  std::vector<double> onehot(T * onehot_dim, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    onehot[t * onehot_dim + static_cast<std::size_t>(example.args[t])] = 1.0;
    const std::size_t pos = example.pos[t] < cfg.pos_dim ? example.pos[t] : corpus::Vocab::kUnk;
    onehot[t * onehot_dim + cfg.arg_dim + pos] = 1.0;
  }
  const Tensor x = concat(embedded, Tensor::matrix(T, onehot_dim, std::move(onehot)));

  const Tensor states = onlstm::encode_bidirectional(p.forward, p.backward, x);
  const Tensor pair = dual::pair_embedding(embedded, example.arg1, example.arg2);
  const dual::Attention local = dual::attend(states, pair, p.attention);
  const Tensor global = dual::conv_stack(x, p.conv);
  Tensor fused = dual::fuse(local.features, global);
  fused = dropout(fused, cfg.dropout_p, options.dropout_seed, options.training);
  return add(matmul(fused, p.emission_weights), p.emission_bias);
}

Tensor loss(const Model& model, const Encoded& example, const ForwardOptions& options) {
  if (example.gold.size() != example.length) {
    throw InputError("loss: example '" + example.id + "' has no gold labels");
  }
  return crf::nll_loss(emissions(model, example, options), model.params.transitions, example.gold);
}

Prediction predict_one(const Model& model, const Sentence& sentence, const CandidatePair& pair) {
  NoGradScope no_grad;
  const Encoded e = encode(model, sentence, pair.arg1, pair.arg2);
  const crf::Decoding d = crf::viterbi(emissions(model, e), model.params.transitions);
  tags::TagSequence seq;
  for (std::size_t l : d.labels) seq.push_back(tags::relation_label(l));
  auto rel = tags::decode_relation(seq);
  Prediction out;
  out.pair = pair;
  out.status = rel.status;
  out.labels = d.labels;
  if (rel.relation) {
    out.extraction = Extraction{sentence.id, Triple{pair.arg1, *rel.relation, pair.arg2}, d.confidence};
  }
  return out;
}

std::vector<Prediction> predict(const Model& model, const Sentence& sentence,
                                std::span<const CandidatePair> pairs) {
  std::vector<Prediction> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(predict_one(model, sentence, p));
  return out;
}

RelationScores score_records(const Model& model, std::span<const Encoded> examples,
                             std::size_t workers) {
  struct Slot {
    double loss = 0.0;
    bool predicted = false;
    bool correct = false;
  };
  std::vector<Slot> slots(examples.size());
  parallel_for(examples.size(), workers, [&](std::size_t i) {
    NoGradScope no_grad;
    const Encoded& e = examples[i];
    const Tensor em = emissions(model, e);
    slots[i].loss = crf::nll_loss(em, model.params.transitions, e.gold).item();
    const auto d = crf::viterbi(em, model.params.transitions);
    tags::TagSequence got, want;
    for (std::size_t l : d.labels) got.push_back(tags::relation_label(l));
    for (std::size_t l : e.gold) want.push_back(tags::relation_label(l));
    const auto predicted = tags::decode_relation(got).relation;
    slots[i].predicted = predicted.has_value();
    slots[i].correct = predicted && predicted == tags::decode_relation(want).relation;
  });
  RelationScores s;
  std::size_t predicted = 0, correct = 0;
  for (const auto& slot : slots) {
    s.loss += slot.loss;
    predicted += slot.predicted;
    correct += slot.correct;
  }
  if (examples.empty()) return s;
  s.loss /= static_cast<double>(examples.size());
  s.precision = predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
  s.recall = static_cast<double>(correct) / static_cast<double>(examples.size());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

PlateauSchedule::PlateauSchedule(double lr, double factor, std::size_t patience)
    : lr_(lr), factor_(factor), patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw ConfigError("plateau schedule: patience must be positive");
}

bool PlateauSchedule::observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    wait_ = 0;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  if (++wait_ >= patience_) {
    lr_ *= factor_;
    wait_ = 0;
  }
  return false;
}

Adam::Adam(std::vector<Tensor> leaves, double beta1, double beta2, double eps)
    : leaves_(std::move(leaves)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& l : leaves_) {
    m_.emplace_back(l.size(), 0.0);
    v_.emplace_back(l.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (const auto& l : leaves_) l.zero_grad();
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < leaves_.size(); ++k) {
    auto w = leaves_[k].mutable_values();
    const auto g = leaves_[k].grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["val_loss"] = r.val_loss;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["lr"] = r.lr;
  return j.dump();
}

TrainResult train(Model& model, std::span<const corpus::CorpusRecord> train_records,
                  std::span<const corpus::CorpusRecord> val_records, const TrainOptions& options) {
  const auto& cfg = model.config;
  cfg.validate();
  if (train_records.empty() || val_records.empty()) {
    throw InputError("train: both the training and validation sets must be non-empty");
  }
  std::vector<Encoded> train_set, val_set;
  for (const auto& r : train_records) train_set.push_back(encode(model, r));
  for (const auto& r : val_records) val_set.push_back(encode(model, r));

  const std::vector<Tensor> leaves = model.params.leaves();
  Adam adam(leaves);
  PlateauSchedule schedule(cfg.lr, cfg.lr_factor, cfg.lr_patience);
  Rng order_rng(mix(cfg.seed, 0x5eed));
  std::vector<std::vector<double>> best;
  const auto snapshot = [&] {
    best.clear();
    for (const auto& l : leaves) best.emplace_back(l.values().begin(), l.values().end());
  };
  snapshot();

  TrainResult result;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order);
    const double lr = schedule.lr();
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      adam.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        Tape tape;
        Tape::Scope scope(tape);
        const ForwardOptions fo{true, mix(mix(cfg.seed, epoch), idx)};
        const Tensor l = loss(model, train_set[idx], fo);
        if (!std::isfinite(l.item())) {
          std::ostringstream msg;
          msg << "training diverged: non-finite loss at epoch " << epoch << ", batch "
              << start / cfg.batch_size << ", record '" << train_set[idx].id << "' (lr " << lr
              << ", mean loss so far " << (k > 0 ? total / static_cast<double>(k) : 0.0) << ")";
          throw TrainingDiverged(msg.str());
        }
        total += l.item();
        tape.backward(ops::affine(l, scale, 0.0));
      }
      adam.step(lr);
    }

    const RelationScores val = score_records(model, val_set, options.workers);
    if (!std::isfinite(val.loss)) {
      throw TrainingDiverged("training diverged: non-finite validation loss after epoch " +
                             std::to_string(epoch));
    }
    EpochRecord rec{epoch, total / static_cast<double>(train_set.size()), val.loss, val.precision,
                    val.recall, val.f1, lr};
    if (schedule.observe(val.loss)) {
      snapshot();
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    const bool keep_going = !options.on_epoch || options.on_epoch(rec);
    if (!keep_going || schedule.epochs_since_best() >= cfg.early_stop_patience) break;
  }

  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Tensor leaf = leaves[k];
    std::copy(best[k].begin(), best[k].end(), leaf.mutable_values().begin());
    leaf.zero_grad();
  }
  return result;
}

namespace {

constexpr char kMagic[8] = {'O', 'R', 'E', 'T', 'A', 'G', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxString = 1u << 20;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint is truncated");
  return v;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > kMaxString) throw FormatError("checkpoint is corrupt: implausible string length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("checkpoint is truncated");
  return s;
}

void put_vocab(std::ostream& out, const corpus::Vocab& v) {
  put<std::uint64_t>(out, v.size());
  for (const auto& t : v.tokens()) put_string(out, t);
}

corpus::Vocab get_vocab(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  corpus::Vocab v;
  if (n < 2 || n > (1u << 26)) throw FormatError("checkpoint is corrupt: bad vocabulary size");
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::string t = get_string(in);
    if (v.add(t) != i) throw FormatError("checkpoint is corrupt: vocabulary is not injective");
  }
  return v;
}

}  // namespace

void save(const Model& model, std::ostream& out) {
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  std::string cfg;
  for (const auto& [k, v] : model.config.entries()) cfg += k + "=" + v + "\n";
  put_string(out, cfg);
  put_vocab(out, model.vocab.words);
  put_vocab(out, model.vocab.pos);
  const auto named = model.params.named();
  put<std::uint64_t>(out, named.size());
  for (const auto& [name, t] : named) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw Error("checkpoint: write failed");
}

Model load(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw FormatError("not a model checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kVersion) + ")");
  }
  ModelConfig config;
  {
    std::istringstream cfg(get_string(in));
    apply_config(config, cfg);
  }
  corpus::Vocabularies vocab{get_vocab(in), get_vocab(in)};
  Model model = Model::create(config, std::move(vocab));
  const auto named = model.params.named();
  const auto count = get<std::uint64_t>(in);
  if (count != named.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(named.size()));
  }
  for (auto [name, t] : named) {
    const std::string got = get_string(in);
    if (got != name) throw FormatError("checkpoint tensor '" + got + "' found where '" + name + "' was expected");
    const auto rank = get<std::uint32_t>(in);
    if (rank > 4) throw FormatError("checkpoint tensor '" + name + "' has implausible rank");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in));
    if (shape != t.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                        ", expected " + shape_string(t.shape()));
    }
    auto values = t.mutable_values();
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw FormatError("checkpoint is truncated");
    }
  }
  return model;
}

void save(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  save(model, out);
}

Model load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  return load(in);
}

}  // namespace oretag::model
