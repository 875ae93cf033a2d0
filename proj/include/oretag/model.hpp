#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "oretag/corpus.hpp"
#include "oretag/dualaware.hpp"
#include "oretag/onlstm.hpp"
#include "oretag/tagspace.hpp"
#include "oretag/tensor.hpp"

// The full tagger: token embeddings -> bidirectional ON-LSTM with
// argument-aware attention, fused with a convolutional sentence vector ->
// per-token emission scores -> CRF over the relation labels.
namespace oretag::model {

struct ModelConfig {
  std::size_t word_dim = 300;
  std::size_t pos_dim = 59;
  std::size_t arg_dim = tags::kArgSymbols;
  std::size_t hidden = 200;
  std::size_t conv_filters = 200;
  std::size_t conv_depth = 3;
  std::size_t attention_dim = 200;
  double dropout_p = 0.5;
  std::size_t batch_size = 256;
  double lr = 0.001;
  double lr_factor = 0.1;
  std::size_t lr_patience = 3;
  std::size_t early_stop_patience = 5;
  std::size_t max_epochs = 50;
  std::uint64_t seed = 1;
  bool master_input_complement = false;
  std::size_t labels = tags::kRelationLabels;

  static ModelConfig full_scale();
  // Small enough to train on one core in minutes.
  static ModelConfig desk_scale();

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::size_t input_dim() const { return word_dim + arg_dim + pos_dim; }

  // key=value access for config files and the command line.
  void set(std::string_view key, std::string_view value);
  std::vector<std::pair<std::string, std::string>> entries() const;
  static std::vector<std::string> keys();
};

// Reads "key = value" lines; '#' starts a comment.
void apply_config(ModelConfig& config, std::istream& in);

struct Params {
  Tensor words;  // (vocab x word_dim)
  onlstm::Params forward;
  onlstm::Params backward;
  dual::AttentionParams attention;
  dual::ConvStackParams conv;
  Tensor emission_weights;  // (fused x labels)
  Tensor emission_bias;     // (labels)
  Tensor transitions;       // (labels+2 x labels+2)

  // When `word_table` is given it must be (vocab x word_dim); otherwise
  // rows are drawn uniform in [-0.05, 0.05].
  static Params init(const ModelConfig& config, std::size_t vocab_size, Rng& rng,
                     std::optional<Tensor> word_table = std::nullopt);
  // Fixed order; also the checkpoint order.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> leaves() const;
};

struct Model {
  ModelConfig config;
  corpus::Vocabularies vocab;
  Params params;

  static Model create(const ModelConfig& config, corpus::Vocabularies vocab,
                      std::optional<Tensor> word_table = std::nullopt);
};

// Index form of one (sentence, candidate pair). Vectors may be longer than
// `length`; the tail is PAD.
struct Encoded {
  std::string id;
  std::size_t length = 0;
  std::vector<std::size_t> words;
  std::vector<std::size_t> pos;
  std::vector<tags::ArgSymbol> args;
  SpanSet arg1;
  SpanSet arg2;
  std::vector<std::size_t> gold;  // relation label per real token, empty when unknown
};

Encoded encode(const Model& model, const Sentence& sentence, const SpanSet& arg1,
               const SpanSet& arg2, std::size_t padded_length = 0);
Encoded encode(const Model& model, const corpus::CorpusRecord& record, std::size_t padded_length = 0);

// Padded group of examples. Row-major (size x max_length) index matrices.
struct Batch {
  std::size_t max_length = 0;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> words;
  std::vector<std::size_t> pos;
  std::vector<tags::ArgSymbol> args;
  std::vector<std::size_t> gold;  // kOutsideLabel on padding
  std::vector<SpanSet> arg1;
  std::vector<SpanSet> arg2;
  std::vector<std::string> ids;

  std::size_t size() const { return lengths.size(); }
  Encoded example(std::size_t i) const;
};

Batch make_batch(std::span<const Encoded> examples);

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

// (length x labels) emission scores. Only the first `length` positions are
// computed, so padding never reaches the real positions.
Tensor emissions(const Model& model, const Encoded& example, const ForwardOptions& options = {});

// CRF negative log-likelihood of the gold labels.
Tensor loss(const Model& model, const Encoded& example, const ForwardOptions& options = {});

struct Extraction {
  std::string sentence_id;
  Triple triple;
  double confidence = 0.0;
};

struct CandidatePair {
  SpanSet arg1;
  SpanSet arg2;
};

struct Prediction {
  CandidatePair pair;
  std::optional<Extraction> extraction;
  tags::DecodeStatus status = tags::DecodeStatus::kOk;
  std::vector<std::size_t> labels;  // Viterbi relation labels
};

Prediction predict_one(const Model& model, const Sentence& sentence, const CandidatePair& pair);
std::vector<Prediction> predict(const Model& model, const Sentence& sentence,
                                std::span<const CandidatePair> pairs);

// Relation-level scores used for model selection: a record counts as
// correct when its decoded relation span equals the gold one.
struct RelationScores {
  double loss = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

RelationScores score_records(const Model& model, std::span<const Encoded> examples,
                             std::size_t workers = 1);

// Cuts the learning rate after `patience` epochs without a strictly lower
// loss, then starts counting again.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double factor, std::size_t patience);
  // Returns true when `loss` is a new best.
  bool observe(double loss);
  double lr() const { return lr_; }
  std::size_t epochs_since_best() const { return since_best_; }

 private:
  double lr_;
  double factor_;
  std::size_t patience_;
  double best_;
  std::size_t wait_ = 0;
  std::size_t since_best_ = 0;
};

class Adam {
 public:
  explicit Adam(std::vector<Tensor> leaves, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(double lr);
  void zero_grad();

 private:
  std::vector<Tensor> leaves_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double lr = 0.0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

std::string to_json_line(const EpochRecord& record);

struct TrainOptions {
  std::size_t workers = 1;
  // Called after every epoch; return false to stop early.
  std::function<bool(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

// Raised when the loss stops being finite.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Trains `model` in place. On return it holds the parameters of the epoch
// with the lowest validation loss.
TrainResult train(Model& model, std::span<const corpus::CorpusRecord> train_records,
                  std::span<const corpus::CorpusRecord> val_records, const TrainOptions& options = {});

// Versioned binary checkpoint: config, vocabularies and every tensor with
// its name and shape.
void save(const Model& model, std::ostream& out);
Model load(std::istream& in);
void save(const Model& model, const std::string& path);
Model load(const std::string& path);

}  // namespace oretag::model
