#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "oretag/tagspace.hpp"

namespace oretag::testing {

inline Sentence make_sentence(const std::string& id, const std::string& text,
                              const std::vector<std::string>& pos = {}) {
  Sentence s;
  s.id = id;
  std::istringstream in(text);
  std::string word;
  std::size_t i = 0;
  while (in >> word) {
    s.tokens.push_back({word, i < pos.size() ? pos[i] : std::string("NN")});
    ++i;
  }
  return s;
}

inline SpanSet span(std::initializer_list<std::size_t> positions) { return SpanSet{positions}; }

// The running example with three overlapping triples.
inline Sentence figure_sentence() {
  return make_sentence("fig1",
                       "The America President Trump will visit the Apple founded by Steven Paul Jobs .",
                       {"DT", "NP", "NP", "NP", "MD", "VV", "DT", "NP", "VVN", "IN", "NP", "NP",
                        "NP", "SENT"});
}

inline std::vector<Triple> figure_triples() {
  return {
      Triple{span({0, 1}), span({2}), span({3})},
      Triple{span({3}), span({4, 5}), span({6, 7})},
      Triple{span({6, 7}), span({8, 9}), span({10, 11, 12})},
  };
}

}  // namespace oretag::testing
