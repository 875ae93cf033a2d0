#include "oretag/tagspace.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace oretag {

bool SpanSet::strictly_increasing() const {
  return std::adjacent_find(positions.begin(), positions.end(),
                            [](std::size_t a, std::size_t b) { return a >= b; }) ==
         positions.end();
}

bool SpanSet::contains(std::size_t position) const {
  return std::find(positions.begin(), positions.end(), position) != positions.end();
}

std::string span_text(const Sentence& sentence, const SpanSet& span) {
  std::string out;
  for (std::size_t p : span.positions) {
    if (!out.empty()) out += ' ';
    out += sentence.tokens.at(p).surface;
  }
  return out;
}

namespace tags {

namespace {

constexpr std::array<std::string_view, 3> kRolePrefix = {"E1", "R", "E2"};
constexpr std::array<char, 4> kPositionLetter = {'B', 'I', 'E', 'S'};

Position position_for(std::size_t index, std::size_t count) {
  if (count == 1) return Position::kSingle;
  if (index == 0) return Position::kBegin;
  if (index + 1 == count) return Position::kEnd;
  return Position::kInside;
}

// True when the labels read S or B I* E.
bool well_formed(const std::vector<Position>& labels) {
  if (labels.empty()) return true;
  if (labels.size() == 1) return labels[0] == Position::kSingle;
  if (labels.front() != Position::kBegin || labels.back() != Position::kEnd) return false;
  return std::all_of(labels.begin() + 1, labels.end() - 1,
                     [](Position p) { return p == Position::kInside; });
}

const char* role_name(Role role) {
  switch (role) {
    case Role::kArg1: return "Argument1";
    case Role::kRel: return "Relation";
    case Role::kArg2: return "Argument2";
  }
  return "?";
}

std::string quoted(const Sentence& sentence, std::size_t position) {
  return "\"" + sentence.tokens[position].surface + "\"";
}

bool overlaps(const SpanSet& a, const SpanSet& b) {
  return std::any_of(a.positions.begin(), a.positions.end(),
                     [&](std::size_t p) { return b.contains(p); });
}

}  // namespace

std::string to_string(const Tag& tag) {
  if (tag.is_outside()) return "O";
  std::string out(kRolePrefix[static_cast<std::size_t>(*tag.role)]);
  out += '-';
  out += kPositionLetter[static_cast<std::size_t>(tag.position)];
  return out;
}

Tag parse_tag(std::string_view text) {
  if (text == "O") return Tag::outside();
  const auto dash = text.find('-');
  if (dash != std::string_view::npos && dash + 2 == text.size()) {
    const auto prefix = text.substr(0, dash);
    const auto role_it = std::find(kRolePrefix.begin(), kRolePrefix.end(), prefix);
    const auto pos_it = std::find(kPositionLetter.begin(), kPositionLetter.end(), text.back());
    if (role_it != kRolePrefix.end() && pos_it != kPositionLetter.end()) {
      return Tag::of(static_cast<Role>(role_it - kRolePrefix.begin()),
                     static_cast<Position>(pos_it - kPositionLetter.begin()));
    }
  }
  throw FormatError("unknown tag label '" + std::string(text) + "'");
}

std::string to_string(const TagSequence& sequence) {
  std::string out;
  for (const Tag& t : sequence) {
    if (!out.empty()) out += ' ';
    out += to_string(t);
  }
  return out;
}

std::size_t relation_label_index(const Tag& tag) {
  if (tag.is_outside()) return kOutsideLabel;
  if (*tag.role != Role::kRel) {
    throw InputError("tag " + to_string(tag) + " is not in the relation label alphabet");
  }
  return static_cast<std::size_t>(tag.position);
}

Tag relation_label(std::size_t index) {
  if (index == kOutsideLabel) return Tag::outside();
  if (index > kOutsideLabel) throw InputError("relation label index out of range");
  return Tag::of(Role::kRel, static_cast<Position>(index));
}

ConstraintViolation::ConstraintViolation(std::vector<Violation> violations)
    : InputError([&] {
        std::string msg = "triple violates word-order constraints:";
        for (const auto& v : violations) msg += " " + v.message + ";";
        return msg;
      }()),
      violations_(std::move(violations)) {}

std::vector<Violation> validate_order(const Sentence& sentence, const Triple& triple) {
  const std::array<std::pair<Role, const SpanSet*>, 3> spans = {
      std::pair{Role::kArg1, &triple.arg1}, {Role::kRel, &triple.rel}, {Role::kArg2, &triple.arg2}};
  for (const auto& [role, span] : spans) {
    for (std::size_t p : span->positions) {
      if (p >= sentence.size()) {
        throw InputError(std::string(role_name(role)) + " position " + std::to_string(p) +
                         " is outside a sentence of " + std::to_string(sentence.size()) +
                         " tokens");
      }
    }
  }

  std::vector<Violation> out;
  for (const auto& [role, span] : spans) {
    if (span->empty()) {
      out.push_back({ViolationKind::kEmptySpan, std::string(role_name(role)) + " is empty"});
    } else if (!span->strictly_increasing()) {
      out.push_back({role == Role::kRel ? ViolationKind::kRelationOutOfOrder
                                        : ViolationKind::kSpanNotIncreasing,
                     std::string(role_name(role)) + " words are not in sentence order"});
    }
  }
  if (!out.empty()) return out;

  if (overlaps(triple.arg1, triple.rel) || overlaps(triple.arg1, triple.arg2) ||
      overlaps(triple.rel, triple.arg2)) {
    out.push_back({ViolationKind::kSpansOverlap, "triple elements share tokens"});
  }
  // Each relation word is addressed by position, so it occurs in the
  // sentence by construction.
  const auto [rel_min, rel_max] =
      std::minmax_element(triple.rel.positions.begin(), triple.rel.positions.end());
  const std::size_t arg1_max =
      *std::max_element(triple.arg1.positions.begin(), triple.arg1.positions.end());
  const std::size_t arg2_min =
      *std::min_element(triple.arg2.positions.begin(), triple.arg2.positions.end());
  if (arg1_max >= *rel_min) {
    out.push_back({ViolationKind::kArg1NotBeforeRelation,
                   "Argument1 token " + quoted(sentence, arg1_max) + " follows Relation token " +
                       quoted(sentence, *rel_min)});
  }
  if (arg2_min <= *rel_max) {
    out.push_back({ViolationKind::kArg2NotAfterRelation,
                   "Argument2 token " + quoted(sentence, arg2_min) + " precedes Relation token " +
                       quoted(sentence, *rel_max)});
  }
  return out;
}

TagSequence encode_tags(const Sentence& sentence, const Triple& triple) {
  auto violations = validate_order(sentence, triple);
  if (!violations.empty()) throw ConstraintViolation(std::move(violations));
  TagSequence out(sentence.size(), Tag::outside());
  const std::array<std::pair<Role, const SpanSet*>, 3> spans = {
      std::pair{Role::kArg1, &triple.arg1}, {Role::kRel, &triple.rel}, {Role::kArg2, &triple.arg2}};
  for (const auto& [role, span] : spans) {
    const std::size_t n = span->positions.size();
    for (std::size_t k = 0; k < n; ++k) {
      out[span->positions[k]] = Tag::of(role, position_for(k, n));
    }
  }
  return out;
}

TagSequence encode_relation(std::size_t length, const SpanSet& relation) {
  if (relation.empty() || !relation.strictly_increasing() || relation.back() >= length) {
    throw InputError("relation span is empty, unordered, or outside the sentence");
  }
  TagSequence out(length, Tag::outside());
  const std::size_t n = relation.positions.size();
  for (std::size_t k = 0; k < n; ++k) {
    out[relation.positions[k]] = Tag::of(Role::kRel, position_for(k, n));
  }
  return out;
}

std::string_view to_string(DecodeStatus status) {
  switch (status) {
    case DecodeStatus::kOk: return "ok";
    case DecodeStatus::kMissing: return "missed";
    case DecodeStatus::kSchemeViolation: return "scheme_violation";
  }
  return "?";
}

namespace {

struct RoleCollect {
  SpanSet span;
  std::vector<Position> labels;
};

std::array<RoleCollect, 3> collect_roles(const TagSequence& sequence) {
  std::array<RoleCollect, 3> roles;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const Tag& tag = sequence[t];
    if (tag.is_outside()) continue;
    auto& r = roles[static_cast<std::size_t>(*tag.role)];
    r.span.positions.push_back(t);
    r.labels.push_back(tag.position);
  }
  return roles;
}

}  // namespace

DecodeResult decode_tags(const Sentence& sentence, const TagSequence& sequence) {
  if (sequence.size() != sentence.size()) {
    throw InputError("tag sequence length " + std::to_string(sequence.size()) +
                     " differs from sentence length " + std::to_string(sentence.size()));
  }
  auto roles = collect_roles(sequence);
  for (const auto& r : roles) {
    if (!well_formed(r.labels)) return {std::nullopt, DecodeStatus::kSchemeViolation};
  }
  for (const auto& r : roles) {
    if (r.span.empty()) return {std::nullopt, DecodeStatus::kMissing};
  }
  return {Triple{std::move(roles[0].span), std::move(roles[1].span), std::move(roles[2].span)},
          DecodeStatus::kOk};
}

RelationDecode decode_relation(const TagSequence& sequence) {
  auto roles = collect_roles(sequence);
  auto& rel = roles[static_cast<std::size_t>(Role::kRel)];
  if (!well_formed(rel.labels)) return {std::nullopt, DecodeStatus::kSchemeViolation};
  if (rel.span.empty()) return {std::nullopt, DecodeStatus::kMissing};
  return {std::move(rel.span), DecodeStatus::kOk};
}

std::string_view to_string(ArgSymbol symbol) {
  static constexpr std::array<std::string_view, kArgSymbols> kNames = {
      "E1-B", "E1-I", "E1-E", "E1-S", "E2-B", "E2-I", "E2-E", "E2-S", "O", "PAD"};
  return kNames[static_cast<std::size_t>(symbol)];
}

std::vector<ArgSymbol> argument_onehot(const Sentence& sentence, const SpanSet& arg1,
                                       const SpanSet& arg2, std::size_t padded_length) {
  const std::size_t length = std::max(padded_length, sentence.size());
  for (const SpanSet* span : {&arg1, &arg2}) {
    if (span->empty() || !span->strictly_increasing() || span->back() >= sentence.size()) {
      throw InputError("argument span is empty, unordered, or outside the sentence");
    }
  }
  if (overlaps(arg1, arg2)) throw InputError("candidate arguments overlap");

  std::vector<ArgSymbol> out(length, ArgSymbol::kPad);
  std::fill_n(out.begin(), sentence.size(), ArgSymbol::kOutside);
  const auto mark = [&](const SpanSet& span, std::size_t base) {
    const std::size_t n = span.positions.size();
    for (std::size_t k = 0; k < n; ++k) {
      out[span.positions[k]] =
          static_cast<ArgSymbol>(base + static_cast<std::size_t>(position_for(k, n)));
    }
  };
  mark(arg1, static_cast<std::size_t>(ArgSymbol::kE1Begin));
  mark(arg2, static_cast<std::size_t>(ArgSymbol::kE2Begin));
  return out;
}

}  // namespace tags
}  // namespace oretag
