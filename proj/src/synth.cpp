#include "promptbias/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "promptbias/error.hpp"
#include "promptbias/random.hpp"

namespace promptbias {

namespace {

std::string word_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, i);
  return buf;
}

std::vector<std::string> word_list(const char* prefix, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(word_name(prefix, i));
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

// Stream tags keep every random decision on its own generator so that, for
// example, interviewer text never depends on the label draw.
enum Stream : std::uint64_t { kStructureStream = 0, kAskerStream = 1, kSpeakerStream = 2, kProbeStream = 3 };

std::uint64_t stream_seed(std::uint64_t seed, std::size_t interview, Stream s) {
  return derive_seed(seed, static_cast<std::uint64_t>(interview) * 8 + s);
}

}  // namespace

void SynthSpec::validate() const {
  const auto fail = [](const std::string& what) { throw DataError("synth spec: " + what); };
  if (n_train < 2) fail("n_train must be >= 2");
  if (!(depressed_fraction > 0.0 && depressed_fraction < 1.0)) fail("depressed_fraction must lie in (0,1)");
  if (interviewer_vocab < 1 || prompt_repertoire < 1 || participant_vocab < 1) fail("vocabularies must be nonempty");
  if (class_signal > 0.0 && class_vocab < 1) fail("class_vocab must be nonempty when class_signal > 0");
  if (turns_min < 2 || turns_min > turns_max) fail("turn range must be nonempty with at least 2 turns");
  if (tokens_min < 1 || tokens_min > tokens_max) fail("token range must be nonempty");
  if (!(probe_position > 0.0 && probe_position < 1.0)) fail("probe_position must lie in (0,1)");
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0)) fail("bias_strength must lie in [0,1]");
  if (!(class_signal >= 0.0 && class_signal <= 1.0)) fail("class_signal must lie in [0,1]");
  if (bias_strength > 0.0) {
    if (probe_tokens.empty()) fail("probe_tokens must be nonempty");
    const auto base = word_list("q", interviewer_vocab);
    const std::set<std::string> reserved(base.begin(), base.end());
    for (const auto& p : probe_tokens) {
      if (tokenize(p) != std::vector<std::string>{p}) fail("probe token '" + p + "' is not a normalised token");
      if (reserved.count(p) != 0) fail("probe token '" + p + "' collides with the interviewer vocabulary");
    }
    if (probe_tokens.size() >= (turns_min / 2) * tokens_min) {
      fail("probe block is longer than the shortest interview");
    }
  }
}

SynthCorpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  const auto interviewer_words = word_list("q", spec.interviewer_vocab);
  const auto shared_words = word_list("w", spec.participant_vocab);
  const auto depressed_words = word_list("pa", spec.class_vocab);
  const auto control_words = word_list("pb", spec.class_vocab);

  Rng corpus_rng(derive_seed(spec.seed, ~0ull));
  std::vector<std::vector<std::string>> prompts(spec.prompt_repertoire);
  for (auto& prompt : prompts) {
    const auto len = static_cast<std::size_t>(corpus_rng.between(static_cast<long>(spec.tokens_min),
                                                                 static_cast<long>(spec.tokens_max)));
    for (std::size_t i = 0; i < len; ++i) prompt.push_back(interviewer_words[corpus_rng.index(interviewer_words.size())]);
  }

  const auto assign_labels = [&](std::size_t n) {
    auto n_dep = static_cast<std::size_t>(std::llround(spec.depressed_fraction * static_cast<double>(n)));
    n_dep = std::clamp<std::size_t>(n_dep, n >= 2 ? 1 : 0, n >= 2 ? n - 1 : n);
    std::vector<Label> labels(n, Label::control);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_dep), Label::depressed);
    for (std::size_t i = n; i > 1; --i) std::swap(labels[i - 1], labels[corpus_rng.index(i)]);
    return labels;
  };

  SynthCorpus out;
  out.descriptor.probe_tokens = spec.probe_tokens;
  out.descriptor.probe_position = spec.probe_position;
  std::size_t global = 0;
  for (const auto split : {Split::train, Split::eval}) {
    const std::size_t n = split == Split::train ? spec.n_train : spec.n_eval;
    auto& corpus = split == Split::train ? out.data.train : out.data.eval;
    corpus.split = split;
    const auto labels = assign_labels(n);
    for (std::size_t i = 0; i < n; ++i, ++global) {
      Rng structure(stream_seed(spec.seed, global, kStructureStream));
      Rng asker(stream_seed(spec.seed, global, kAskerStream));
      Rng speaker(stream_seed(spec.seed, global, kSpeakerStream));
      Rng probe(stream_seed(spec.seed, global, kProbeStream));

      Transcript t;
      t.interview_id = std::to_string(1000 + global);
      const auto label = labels[i];
      auto n_turns = static_cast<std::size_t>(structure.between(static_cast<long>(spec.turns_min),
                                                                static_cast<long>(spec.turns_max)));
      n_turns += n_turns % 2;  // interviewer/participant pairs
      const auto& own_words = label == Label::depressed ? depressed_words : control_words;
      for (std::size_t turn = 0; turn < n_turns; ++turn) {
        std::vector<std::string> words;
        if (turn % 2 == 0) {
          words = prompts[asker.index(prompts.size())];
          t.turns.push_back({std::string(kInterviewer), 0.0, 0.0, join(words)});
        } else {
          const auto len = static_cast<std::size_t>(speaker.between(static_cast<long>(spec.tokens_min),
                                                                    static_cast<long>(spec.tokens_max)));
          for (std::size_t k = 0; k < len; ++k) {
            const bool from_class = speaker.bernoulli(spec.class_signal);
            const auto& pool = from_class ? own_words : shared_words;
            words.push_back(pool[speaker.index(pool.size())]);
          }
          t.turns.push_back({std::string(kParticipant), 0.0, 0.0, join(words)});
        }
      }

      ProbeRecord record{t.interview_id, split, label, false, 0, 0.0};
      const bool coin = probe.bernoulli(spec.bias_strength);
      if (label == Label::depressed && coin && spec.bias_strength > 0.0) {
        // Replace the interviewer turn whose midpoint, after replacement, is
        // closest to the requested progression.
        const auto counts = turn_token_counts(t);
        std::size_t total = 0;
        for (auto c : counts) total += c;
        const std::size_t block = spec.probe_tokens.size();
        std::size_t chosen = 0;
        double best = 2.0;
        std::size_t before = 0;
        for (std::size_t turn = 0; turn < t.turns.size(); before += counts[turn], ++turn) {
          if (turn % 2 != 0) continue;
          const double after = static_cast<double>(before + (block + 1) / 2) /
                               static_cast<double>(total - counts[turn] + block);
          const double gap = std::abs(after - spec.probe_position);
          if (gap < best) {
            best = gap;
            chosen = turn;
          }
        }
        t.turns[chosen].text = join(spec.probe_tokens);
        record.probed = true;
        record.probe_turn = chosen;
        record.probe_progression = turn_progressions(t)[chosen];
      }

      double clock = 0.0;
      for (auto& turn : t.turns) {
        const auto words = static_cast<double>(tokenize(turn.text).size());
        turn.start_time = clock;
        turn.stop_time = clock + 0.4 * words;
        clock = turn.stop_time + 0.5;
        // Round to milliseconds so the text format round-trips exactly.
        turn.start_time = std::round(turn.start_time * 1000.0) / 1000.0;
        turn.stop_time = std::round(turn.stop_time * 1000.0) / 1000.0;
      }

      corpus.labels.add(t.interview_id, {label, label == Label::depressed ? 15 : 3});
      corpus.transcripts.push_back(std::move(t));
      out.descriptor.interviews.push_back(std::move(record));
    }
  }
  return out;
}

}  // namespace promptbias
