#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oretag/errors.hpp"

namespace oretag {

struct Token {
  std::string surface;
  std::string pos;
};

struct Sentence {
  std::string id;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
};

// Token positions of one triple element, listed in the order the phrase
// gives them. Valid spans are strictly increasing; gaps are allowed.
struct SpanSet {
  std::vector<std::size_t> positions;

  bool empty() const { return positions.empty(); }
  std::size_t front() const { return positions.front(); }
  std::size_t back() const { return positions.back(); }
  bool strictly_increasing() const;
  bool contains(std::size_t position) const;
  friend bool operator==(const SpanSet&, const SpanSet&) = default;
  friend auto operator<=>(const SpanSet&, const SpanSet&) = default;
};

struct Triple {
  SpanSet arg1;
  SpanSet rel;
  SpanSet arg2;
  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

// Surface text of a span, tokens joined by single spaces.
std::string span_text(const Sentence& sentence, const SpanSet& span);

namespace tags {

enum class Role { kArg1, kRel, kArg2 };
enum class Position { kBegin, kInside, kEnd, kSingle };

// One token label: a (role, position) pair, or O when role is absent.
struct Tag {
  std::optional<Role> role;
  Position position = Position::kSingle;

  static Tag outside() { return Tag{}; }
  static Tag of(Role r, Position p) { return Tag{r, p}; }
  bool is_outside() const { return !role.has_value(); }
  friend bool operator==(const Tag&, const Tag&) = default;
};

using TagSequence = std::vector<Tag>;

// "E1-B", "R-S", "O", ...
std::string to_string(const Tag& tag);
// Inverse of to_string; throws FormatError on anything else.
Tag parse_tag(std::string_view text);
std::string to_string(const TagSequence& sequence);

// Model label alphabet: R-B, R-I, R-E, R-S, O.
inline constexpr std::size_t kRelationLabels = 5;
inline constexpr std::size_t kOutsideLabel = 4;
std::size_t relation_label_index(const Tag& tag);
Tag relation_label(std::size_t index);

enum class ViolationKind {
  kEmptySpan,
  kArg1NotBeforeRelation,
  kArg2NotAfterRelation,
  kRelationOutOfOrder,
  kSpanNotIncreasing,
  kSpansOverlap,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

// Word-order constraints for a triple. An empty result means the triple
// is acceptable. Positions past the end of the sentence raise InputError
// instead of producing a violation.
std::vector<Violation> validate_order(const Sentence& sentence, const Triple& triple);

// Thrown by encode_tags when the triple breaks the order constraints.
class ConstraintViolation : public InputError {
 public:
  explicit ConstraintViolation(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// One tag sequence per triple: E1/R/E2 with BIOES positions, O elsewhere.
TagSequence encode_tags(const Sentence& sentence, const Triple& triple);

// Relation-only sequence (R-* and O) as the model emits it.
TagSequence encode_relation(std::size_t length, const SpanSet& relation);

enum class DecodeStatus {
  kOk,
  kMissing,          // a required role has no tokens (e.g. all-O output)
  kSchemeViolation,  // some role's labels do not read S | B I* E
};

std::string_view to_string(DecodeStatus status);

struct DecodeResult {
  std::optional<Triple> triple;
  DecodeStatus status = DecodeStatus::kOk;
};

struct RelationDecode {
  std::optional<SpanSet> relation;
  DecodeStatus status = DecodeStatus::kOk;
};

DecodeResult decode_tags(const Sentence& sentence, const TagSequence& sequence);
// Decodes only the R role; E1/E2 labels are ignored.
RelationDecode decode_relation(const TagSequence& sequence);

// Argument alphabet fed to the model as a one-hot vector.
enum class ArgSymbol : std::size_t {
  kE1Begin, kE1Inside, kE1End, kE1Single,
  kE2Begin, kE2Inside, kE2End, kE2Single,
  kOutside,
  kPad,
};
inline constexpr std::size_t kArgSymbols = 10;

std::string_view to_string(ArgSymbol symbol);

// Per-token argument symbol for a candidate pair. Positions at or past
// the sentence length, up to `padded_length`, are PAD.
std::vector<ArgSymbol> argument_onehot(const Sentence& sentence, const SpanSet& arg1,
                                       const SpanSet& arg2, std::size_t padded_length = 0);

}  // namespace tags
}  // namespace oretag
