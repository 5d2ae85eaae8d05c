#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "promptbias/error.hpp"

using namespace promptbias;

namespace {
const std::string kHeader = "start_time\tstop_time\tspeaker\tvalue\n";
}

TEST_CASE("parse_transcript reads one turn") {
  const auto t = parse_transcript(kHeader + "0.0\t1.5\tEllie\thi i'm ellie\n", "300");
  REQUIRE(t.turns.size() == 1);
  CHECK(t.turns[0].speaker == "Ellie");
  CHECK(t.turns[0].start_time == 0.0);
  CHECK(t.turns[0].stop_time == 1.5);
  CHECK(t.turns[0].text == "hi i'm ellie");
  CHECK(t.interview_id == "300");
}

TEST_CASE("parse_transcript header only") {
  CHECK(parse_transcript(kHeader).turns.empty());
}

TEST_CASE("parse_transcript rejects malformed rows") {
  CHECK_THROWS_AS(parse_transcript(kHeader + "2.0\t1.0\tEllie\thi\n"), DataError);
  CHECK_THROWS_AS(parse_transcript(kHeader + "0.0\t1.0\tEllie\n"), DataError);
  CHECK_THROWS_AS(parse_transcript(kHeader + "zero\t1.0\tEllie\thi\n"), DataError);
  CHECK_THROWS_AS(parse_transcript(kHeader + "0.0\t1.0\tBob\thi\n"), DataError);
  try {
    parse_transcript(kHeader + "0.0\t1.0\tEllie\thi\n1.0\tx\tEllie\thi\n");
    FAIL("expected error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("transcript round-trip") {
  const auto t = testing::transcript("301", {{"Ellie", "how are you doing today"},
                                              {"Participant", "i'm fine, thanks!"},
                                              {"Ellie", "that's good"}});
  CHECK(parse_transcript(serialize_transcript(t), "301") == t);
}

TEST_CASE("tokenize") {
  CHECK(tokenize("I'm sorry,") == std::vector<std::string>{"i'm", "sorry"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Wow!  wow") == std::vector<std::string>{"wow", "wow"});
  CHECK(tokenize("... ?").empty());
}

TEST_CASE("speaker_view") {
  const auto t = testing::transcript("1", {{"Ellie", "hi"}, {"Participant", "hello there"}});
  CHECK(speaker_view(t, SpeakerFilter::only("Participant")).tokens ==
        std::vector<std::string>{"hello", "there"});
  CHECK(speaker_view(t, SpeakerFilter::only("Ellie")).tokens == std::vector<std::string>{"hi"});
  const auto none = speaker_view(testing::transcript("2", {{"Ellie", "hi"}}), SpeakerFilter::only("Participant"));
  CHECK(none.tokens.empty());
  CHECK(none.empty);
  CHECK_FALSE(speaker_view(t, SpeakerFilter::all()).empty);
}

TEST_CASE("speaker_view length equals per-turn token counts of that speaker") {
  const auto t = testing::transcript("1", {{"Ellie", "a b c"}, {"Participant", "d, e"}, {"Ellie", "f!"},
                                           {"Participant", "..."}});
  const auto counts = turn_token_counts(t);
  for (const std::string speaker : {"Ellie", "Participant"}) {
    std::size_t expected = 0;
    for (std::size_t i = 0; i < t.turns.size(); ++i) {
      if (t.turns[i].speaker == speaker) expected += counts[i];
    }
    CHECK(speaker_view(t, SpeakerFilter::only(speaker)).tokens.size() == expected);
  }
}

TEST_CASE("parse_speaker_view") {
  CHECK(parse_speaker_view("interviewer").speaker == "Ellie");
  CHECK(parse_speaker_view("participant").speaker == "Participant");
  CHECK(parse_speaker_view("all").is_all());
  CHECK_THROWS_AS(parse_speaker_view("nobody"), UsageError);
}

TEST_CASE("slice_by_progression equal turns") {
  std::vector<std::pair<std::string, std::string>> turns;
  for (int i = 0; i < 4; ++i) turns.push_back({i % 2 ? "Participant" : "Ellie", testing::repeat("w", 10)});
  const auto t = testing::transcript("1", turns);
  const auto first = slice_by_progression(t, 0.0, 0.5);
  REQUIRE(first.turns.size() == 2);
  CHECK(first.turns[0] == t.turns[0]);
  CHECK(first.turns[1] == t.turns[1]);
  CHECK(slice_by_progression(t, 0.0, 1.0) == t);
}

TEST_CASE("slice_by_progression uneven turns use cumulative midpoints") {
  const auto t = testing::transcript(
      "1", {{"Ellie", "a b"}, {"Participant", "c d"}, {"Ellie", testing::repeat("e", 8)}});
  const auto p = turn_progressions(t);
  REQUIRE(p.size() == 3);
  CHECK(p[0] == doctest::Approx(1.0 / 12));
  CHECK(p[1] == doctest::Approx(3.0 / 12));
  CHECK(p[2] == doctest::Approx(8.0 / 12));
  CHECK(slice_by_progression(t, 0.0, 0.5).turns.size() == 2);
}

TEST_CASE("slice halves partition the turns") {
  const auto t = testing::transcript("1", {{"Ellie", "a b c"}, {"Participant", "d"}, {"Ellie", "e f g h i"},
                                           {"Participant", "j k"}, {"Ellie", "l"}, {"Participant", "m n o p"}});
  const auto a = slice_by_progression(t, 0.0, 0.5);
  const auto b = slice_by_progression(t, 0.5, 1.0);
  CHECK(a.turns.size() + b.turns.size() == t.turns.size());
  std::vector<Turn> joined = a.turns;
  joined.insert(joined.end(), b.turns.begin(), b.turns.end());
  CHECK(joined == t.turns);
}

TEST_CASE("slice of a token-free transcript is empty") {
  const auto t = testing::transcript("1", {{"Ellie", "..."}});
  CHECK(slice_by_progression(t, 0.0, 0.5).turns.empty());
}

TEST_CASE("token progressions are token centres") {
  const auto t = testing::transcript("1", {{"Ellie", "a b"}, {"Participant", "c d"}});
  const auto p = token_progressions(t);
  REQUIRE(p.size() == 2);
  CHECK(p[0][0] == doctest::Approx(0.125));
  CHECK(p[1][1] == doctest::Approx(0.875));
}

TEST_CASE("load_labels") {
  const std::string header = "Participant_ID,PHQ8_Binary,PHQ8_Score\n";
  auto l = load_labels(header + "303,1,12\n");
  CHECK(l.label("303") == Label::depressed);
  CHECK(l.entry("303").severity == 12);
  CHECK(load_labels(header + "303,0,4\n").label("303") == Label::control);
  CHECK_THROWS_AS(load_labels(header + "303,0,4\n303,1,12\n"), DataError);
  CHECK_THROWS_AS(load_labels(header + "303,2,4\n"), DataError);
  CHECK_THROWS_AS(load_labels("id,label\n303,1\n"), DataError);

  LabelColumns cols{"id", "label", "score"};
  CHECK(load_labels("label,id\n1,7\n", cols).label("7") == Label::depressed);
}

TEST_CASE("labels round-trip") {
  LabelTable t;
  t.add("1", {Label::depressed, 11});
  t.add("2", {Label::control, std::nullopt});
  const auto back = load_labels(serialize_labels(t));
  CHECK(back.label("1") == Label::depressed);
  CHECK(back.entry("1").severity == 11);
  CHECK(back.label("2") == Label::control);
  CHECK_FALSE(back.entry("2").severity.has_value());
}

TEST_CASE("dataset directory round-trip") {
  Dataset d;
  d.train.transcripts = {testing::transcript("10", {{"Ellie", "hi"}, {"Participant", "hello"}}),
                         testing::transcript("11", {{"Ellie", "bye"}})};
  d.train.labels.add("10", {Label::depressed, 15});
  d.train.labels.add("11", {Label::control, 2});
  d.eval.split = Split::eval;
  d.eval.transcripts = {testing::transcript("20", {{"Participant", "yes"}})};
  d.eval.labels.add("20", {Label::control, 0});

  const auto root = std::filesystem::temp_directory_path() / "promptbias_test_corpus";
  std::filesystem::remove_all(root);
  write_dataset(d, root);
  const auto back = load_dataset(root);
  CHECK(back.train.transcripts == d.train.transcripts);
  CHECK(back.eval.transcripts == d.eval.transcripts);
  CHECK(back.eval.split == Split::eval);
  CHECK(back.train.labels.label("10") == Label::depressed);

  std::filesystem::remove(root / "transcripts" / "20_TRANSCRIPT.csv");
  CHECK_THROWS_AS(load_dataset(root), DataError);
  std::filesystem::remove_all(root);
}
