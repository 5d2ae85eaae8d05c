#pragma once

#include <string>
#include <utility>
#include <vector>

#include "promptbias/corpus.hpp"

namespace testing {

/// Builds a transcript from (speaker, text) pairs with one-second turns.
inline promptbias::Transcript transcript(std::string id,
                                         const std::vector<std::pair<std::string, std::string>>& turns) {
  promptbias::Transcript t;
  t.interview_id = std::move(id);
  double clock = 0.0;
  for (const auto& [speaker, text] : turns) {
    t.turns.push_back({speaker, clock, clock + 1.0, text});
    clock += 1.0;
  }
  return t;
}

/// `n` space-separated copies of `word`.
inline std::string repeat(const std::string& word, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += word;
  }
  return out;
}

inline promptbias::Document doc(std::string id, std::vector<std::string> tokens) {
  return {std::move(id), std::move(tokens), false};
}

}  // namespace testing
