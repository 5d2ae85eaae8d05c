#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promptbias/corpus.hpp"

namespace promptbias {

/// Parameters of a synthetic two-speaker corpus with a plantable
/// interviewer-prompt marker.
struct SynthSpec {
  std::uint64_t seed = 7;
  std::size_t n_train = 80;
  std::size_t n_eval = 30;
  double depressed_fraction = 0.375;

  std::size_t interviewer_vocab = 60;
  /// Number of fixed prompts the interviewer chooses from.
  std::size_t prompt_repertoire = 40;
  std::size_t participant_vocab = 300;
  /// Words reserved for each class on the participant side.
  std::size_t class_vocab = 60;

  std::size_t turns_min = 40;
  std::size_t turns_max = 60;
  std::size_t tokens_min = 3;
  std::size_t tokens_max = 12;

  std::vector<std::string> probe_tokens{"diagnosed", "depression", "ptsd", "therapist", "treatment"};
  double probe_position = 0.6;
  /// Probability that a depressed interview receives the probe block.
  double bias_strength = 1.0;
  /// Probability that a participant token comes from its class vocabulary.
  double class_signal = 0.0;

  void validate() const;
  bool operator==(const SynthSpec&) const = default;
};

struct ProbeRecord {
  std::string interview_id;
  Split split = Split::train;
  Label label = Label::control;
  bool probed = false;
  std::size_t probe_turn = 0;
  double probe_progression = 0.0;
};

struct SynthDescriptor {
  std::vector<std::string> probe_tokens;
  double probe_position = 0.0;
  std::vector<ProbeRecord> interviews;
};

struct SynthCorpus {
  Dataset data;
  SynthDescriptor descriptor;
};

SynthCorpus generate_corpus(const SynthSpec& spec);

}  // namespace promptbias
