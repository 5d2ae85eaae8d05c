#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "promptbias/error.hpp"
#include "promptbias/synth.hpp"

using namespace promptbias;

namespace {

const ProbeRecord& record_of(const SynthCorpus& c, const std::string& id) {
  for (const auto& r : c.descriptor.interviews) {
    if (r.interview_id == id) return r;
  }
  throw std::runtime_error("missing record " + id);
}

bool has_probe(const Transcript& t, const std::set<std::string>& probes, const std::string& speaker) {
  for (const auto& turn : t.turns) {
    if (!speaker.empty() && turn.speaker != speaker) continue;
    for (const auto& w : tokenize(turn.text)) {
      if (probes.count(w)) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  SynthSpec s;
  const auto a = generate_corpus(s);
  const auto b = generate_corpus(s);
  REQUIRE(a.data.train.transcripts.size() == 80);
  REQUIRE(a.data.eval.transcripts.size() == 30);
  for (std::size_t i = 0; i < a.data.train.transcripts.size(); ++i) {
    CHECK(serialize_transcript(a.data.train.transcripts[i]) == serialize_transcript(b.data.train.transcripts[i]));
  }
  CHECK(serialize_labels(a.data.eval.labels) == serialize_labels(b.data.eval.labels));
  s.seed = 8;
  CHECK(generate_corpus(s).data.train.transcripts[0] != a.data.train.transcripts[0]);
}

TEST_CASE("class balance follows depressed_fraction") {
  const auto c = generate_corpus({});
  std::size_t dep = 0;
  for (const auto& [id, e] : c.data.train.labels.entries()) dep += e.label == Label::depressed;
  CHECK(dep == 30);
}

TEST_CASE("probes appear only in listed interviewer turns") {
  const auto c = generate_corpus({});
  const std::set<std::string> probes(c.descriptor.probe_tokens.begin(), c.descriptor.probe_tokens.end());
  for (const auto* corpus : {&c.data.train, &c.data.eval}) {
    for (const auto& t : corpus->transcripts) {
      const auto& rec = record_of(c, t.interview_id);
      CHECK(has_probe(t, probes, std::string(kInterviewer)) == rec.probed);
      CHECK_FALSE(has_probe(t, probes, std::string(kParticipant)));
      if (rec.probed) CHECK(t.turns[rec.probe_turn].speaker == kInterviewer);
    }
  }
}

TEST_CASE("probe sits within one turn of the requested position") {
  for (double pos : {0.2, 0.6, 0.75}) {
    SynthSpec s;
    s.probe_position = pos;
    const auto c = generate_corpus(s);
    for (const auto* corpus : {&c.data.train, &c.data.eval}) {
      for (const auto& t : corpus->transcripts) {
        const auto& rec = record_of(c, t.interview_id);
        if (!rec.probed) continue;
        const auto p = turn_progressions(t);
        std::size_t nearest = 0;
        for (std::size_t j = 1; j < p.size(); ++j) {
          if (std::abs(p[j] - pos) < std::abs(p[nearest] - pos)) nearest = j;
        }
        const auto j = rec.probe_turn;
        CHECK((j + 1 >= nearest && j <= nearest + 1));
        CHECK(rec.probe_progression == p[j]);
      }
    }
  }
}

TEST_CASE("full bias makes interviewer documents separable by probe presence") {
  SynthSpec s;
  s.bias_strength = 1.0;
  s.class_signal = 0.0;
  const auto c = generate_corpus(s);
  const std::set<std::string> probes(s.probe_tokens.begin(), s.probe_tokens.end());
  for (const auto* corpus : {&c.data.train, &c.data.eval}) {
    for (const auto& t : corpus->transcripts) {
      const auto doc = speaker_view(t, SpeakerFilter::only(std::string(kInterviewer)));
      bool present = false;
      for (const auto& w : doc.tokens) present |= probes.count(w) != 0;
      CHECK(present == (corpus->labels.label(t.interview_id) == Label::depressed));
    }
  }
}

TEST_CASE("class_signal zero keeps class words out of participant text") {
  const auto c = generate_corpus({});
  for (const auto& t : c.data.train.transcripts) {
    for (const auto& w : speaker_view(t, SpeakerFilter::only(std::string(kParticipant))).tokens) {
      CHECK(w.rfind('w', 0) == 0);
    }
  }
}

TEST_CASE("zero bias leaves interviewer streams label-independent") {
  SynthSpec s;
  s.bias_strength = 0.0;
  const auto c = generate_corpus(s);
  for (const auto& r : c.descriptor.interviews) CHECK_FALSE(r.probed);
  // the interviewer stream depends only on the interview position, not on the label
  SynthSpec flipped = s;
  flipped.depressed_fraction = 0.6;
  const auto d = generate_corpus(flipped);
  for (std::size_t i = 0; i < c.data.train.transcripts.size(); ++i) {
    CHECK(speaker_view(c.data.train.transcripts[i], SpeakerFilter::only(std::string(kInterviewer))).tokens ==
          speaker_view(d.data.train.transcripts[i], SpeakerFilter::only(std::string(kInterviewer))).tokens);
  }
}

TEST_CASE("synth corpora round-trip through the text formats") {
  const auto c = generate_corpus({});
  for (const auto& t : c.data.eval.transcripts) {
    CHECK(parse_transcript(serialize_transcript(t), t.interview_id) == t);
  }
}

TEST_CASE("invalid specs are rejected") {
  SynthSpec s;
  s.turns_min = 4;
  s.turns_max = 4;
  s.tokens_min = 1;
  s.tokens_max = 1;
  CHECK_THROWS_AS(s.validate(), DataError);  // 5 probe tokens > 2 interviewer tokens

  s = {};
  s.probe_tokens = {"q001"};
  CHECK_THROWS_AS(s.validate(), DataError);
  s = {};
  s.probe_tokens = {"Diagnosed!"};
  CHECK_THROWS_AS(s.validate(), DataError);
  s = {};
  s.probe_position = 1.0;
  CHECK_THROWS_AS(s.validate(), DataError);
  s = {};
  s.turns_min = 70;
  CHECK_THROWS_AS(s.validate(), DataError);
  s = {};
  s.bias_strength = 1.5;
  CHECK_THROWS_AS(generate_corpus(s), DataError);
}
