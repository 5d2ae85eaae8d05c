#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace promptbias {

inline constexpr std::string_view kInterviewer = "Ellie";
inline constexpr std::string_view kParticipant = "Participant";

enum class Label { control = 0, depressed = 1 };

std::string_view to_string(Label label);

struct Turn {
  std::string speaker;
  double start_time = 0.0;
  double stop_time = 0.0;
  std::string text;

  bool operator==(const Turn&) const = default;
};

struct Transcript {
  std::string interview_id;
  std::vector<Turn> turns;

  bool operator==(const Transcript&) const = default;
};

struct LabelEntry {
  Label label = Label::control;
  std::optional<int> severity;
};

/// Ground truth for one split, keyed by interview id.
class LabelTable {
 public:
  void add(const std::string& id, LabelEntry entry);
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }
  Label label(const std::string& id) const;
  const LabelEntry& entry(const std::string& id) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, LabelEntry>& entries() const { return entries_; }

 private:
  std::map<std::string, LabelEntry> entries_;
};

/// Selects which speaker's turns feed a document. An empty speaker means all.
struct SpeakerFilter {
  std::string speaker;

  static SpeakerFilter all() { return {}; }
  static SpeakerFilter only(std::string s) { return {std::move(s)}; }
  bool is_all() const { return speaker.empty(); }
  bool accepts(std::string_view s) const { return is_all() || s == speaker; }
  std::string name() const { return is_all() ? "all" : speaker; }
};

/// Maps the command-line views ("interviewer", "participant", "all") onto
/// corpus speaker ids.
SpeakerFilter parse_speaker_view(std::string_view view);

enum class Split { train, eval };

struct Corpus {
  Split split = Split::train;
  std::vector<Transcript> transcripts;
  LabelTable labels;
  SpeakerFilter speaker_filter;
};

/// Train and eval splits loaded together from a corpus directory.
struct Dataset {
  Corpus train;
  Corpus eval;
  std::vector<std::string> speakers{std::string(kInterviewer), std::string(kParticipant)};
};

struct Document {
  std::string interview_id;
  std::vector<std::string> tokens;
  bool empty = false;
};

Transcript parse_transcript(std::string_view raw, std::string interview_id = {},
                            const std::vector<std::string>& speakers = {
                                std::string(kInterviewer), std::string(kParticipant)});
std::string serialize_transcript(const Transcript& t);

std::vector<std::string> tokenize(std::string_view text);

/// Lowercased token for one whitespace-delimited word, or empty when the
/// word is pure punctuation.
std::string normalize_word(std::string_view word);

Document speaker_view(const Transcript& t, const SpeakerFilter& filter);
std::vector<Document> speaker_views(const Corpus& corpus, const SpeakerFilter& filter);

/// Token count of every turn under the shared tokenizer.
std::vector<std::size_t> turn_token_counts(const Transcript& t);

/// Progression of each turn: cumulative token count (all speakers) up to and
/// including the turn's midpoint token, over the total. Empty when the
/// transcript has no tokens.
std::vector<double> turn_progressions(const Transcript& t);

/// Centre progression (p - 0.5) / N of every token, grouped per turn.
std::vector<std::vector<double>> token_progressions(const Transcript& t);

Transcript slice_by_progression(const Transcript& t, double from_frac, double to_frac);

struct LabelColumns {
  std::string id = "Participant_ID";
  std::string binary = "PHQ8_Binary";
  std::string score = "PHQ8_Score";
};

LabelTable load_labels(std::string_view raw, const LabelColumns& columns = {});
std::string serialize_labels(const LabelTable& labels);

/// Reads {transcripts/, train_labels.csv, eval_labels.csv}. Transcripts are
/// ordered as the ids appear in the label files.
Dataset load_dataset(const std::filesystem::path& root, const LabelColumns& columns = {});
void write_dataset(const Dataset& data, const std::filesystem::path& root);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace promptbias
