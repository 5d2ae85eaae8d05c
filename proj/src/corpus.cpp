#include "promptbias/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "promptbias/error.hpp"

namespace promptbias {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  while (true) {
    const auto pos = line.find(sep, begin);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(begin));
      return out;
    }
    out.push_back(line.substr(begin, pos - begin));
    begin = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> lines_of(std::string_view raw) {
  auto lines = split(raw, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<long> parse_long(std::string_view s) {
  s = trim(s);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::depressed ? "depressed" : "control";
}

void LabelTable::add(const std::string& id, LabelEntry entry) {
  if (!entries_.emplace(id, entry).second) {
    throw DataError("duplicate label for interview id '" + id + "'");
  }
}

Label LabelTable::label(const std::string& id) const { return entry(id).label; }

const LabelEntry& LabelTable::entry(const std::string& id) const {
  const auto it = entries_.find(id);
  if (it == entries_.end()) throw DataError("no label for interview id '" + id + "'");
  return it->second;
}

SpeakerFilter parse_speaker_view(std::string_view view) {
  if (view == "interviewer") return SpeakerFilter::only(std::string(kInterviewer));
  if (view == "participant") return SpeakerFilter::only(std::string(kParticipant));
  if (view == "all") return SpeakerFilter::all();
  throw UsageError("unknown speaker view '" + std::string(view) +
                   "' (expected interviewer, participant or all)");
}

Transcript parse_transcript(std::string_view raw, std::string interview_id,
                            const std::vector<std::string>& speakers) {
  Transcript t;
  t.interview_id = std::move(interview_id);
  const auto lines = lines_of(raw);
  if (lines.empty()) throw DataError("transcript '" + t.interview_id + "': missing header row");

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto where = "transcript '" + t.interview_id + "' line " + std::to_string(i + 1);
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 4) {
      throw DataError(where + ": expected 4 tab-separated fields, found " +
                      std::to_string(fields.size()));
    }
    const auto start = parse_double(fields[0]);
    const auto stop = parse_double(fields[1]);
    if (!start || !stop) throw DataError(where + ": non-numeric time");
    if (*start < 0.0) throw DataError(where + ": negative start time");
    if (*stop < *start) throw DataError(where + ": stop_time precedes start_time");
    Turn turn{std::string(trim(fields[2])), *start, *stop, std::string(fields[3])};
    if (std::find(speakers.begin(), speakers.end(), turn.speaker) == speakers.end()) {
      throw DataError(where + ": unknown speaker '" + turn.speaker + "'");
    }
    if (!t.turns.empty() && turn.start_time < t.turns.back().start_time) {
      throw DataError(where + ": turns out of start_time order");
    }
    t.turns.push_back(std::move(turn));
  }
  return t;
}

std::string serialize_transcript(const Transcript& t) {
  std::string out = "start_time\tstop_time\tspeaker\tvalue\n";
  for (const auto& turn : t.turns) {
    out += format_double(turn.start_time);
    out += '\t';
    out += format_double(turn.stop_time);
    out += '\t';
    out += turn.speaker;
    out += '\t';
    out += turn.text;
    out += '\n';
  }
  return out;
}

std::string normalize_word(std::string_view word) {
  std::size_t b = 0;
  std::size_t e = word.size();
  while (b < e && is_punct(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && is_punct(static_cast<unsigned char>(word[e - 1]))) --e;
  std::string out(word.substr(b, e - b));
  for (auto& c : out) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    const auto begin = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i > begin) {
      auto token = normalize_word(text.substr(begin, i - begin));
      if (!token.empty()) tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

Document speaker_view(const Transcript& t, const SpeakerFilter& filter) {
  Document doc{t.interview_id, {}, false};
  for (const auto& turn : t.turns) {
    if (!filter.accepts(turn.speaker)) continue;
    auto tokens = tokenize(turn.text);
    doc.tokens.insert(doc.tokens.end(), std::make_move_iterator(tokens.begin()),
                      std::make_move_iterator(tokens.end()));
  }
  doc.empty = doc.tokens.empty();
  return doc;
}

std::vector<Document> speaker_views(const Corpus& corpus, const SpeakerFilter& filter) {
  std::vector<Document> docs;
  docs.reserve(corpus.transcripts.size());
  for (const auto& t : corpus.transcripts) docs.push_back(speaker_view(t, filter));
  return docs;
}

std::vector<std::size_t> turn_token_counts(const Transcript& t) {
  std::vector<std::size_t> counts;
  counts.reserve(t.turns.size());
  for (const auto& turn : t.turns) counts.push_back(tokenize(turn.text).size());
  return counts;
}

std::vector<double> turn_progressions(const Transcript& t) {
  const auto counts = turn_token_counts(t);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) return {};

  std::vector<double> progression;
  progression.reserve(counts.size());
  std::size_t before = 0;
  for (auto c : counts) {
    // 1-based position of the midpoint token; an empty turn sits at the
    // boundary where it occurs.
    const std::size_t midpoint = before + (c + 1) / 2;
    progression.push_back(static_cast<double>(midpoint) / static_cast<double>(total));
    before += c;
  }
  return progression;
}

std::vector<std::vector<double>> token_progressions(const Transcript& t) {
  const auto counts = turn_token_counts(t);
  std::size_t total = 0;
  for (auto c : counts) total += c;

  std::vector<std::vector<double>> out(counts.size());
  std::size_t position = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i].reserve(counts[i]);
    for (std::size_t j = 0; j < counts[i]; ++j) {
      ++position;
      out[i].push_back((static_cast<double>(position) - 0.5) / static_cast<double>(total));
    }
  }
  return out;
}

Transcript slice_by_progression(const Transcript& t, double from_frac, double to_frac) {
  if (!(from_frac < to_frac)) throw UsageError("slice_by_progression: from_frac must be < to_frac");
  Transcript out{t.interview_id, {}};
  const auto progression = turn_progressions(t);
  if (progression.empty()) return out;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const double p = progression[i];
    // A turn whose midpoint lands exactly on 1.0 belongs to the final slice.
    const bool in_range = p >= from_frac && (p < to_frac || (to_frac >= 1.0 && p <= 1.0));
    if (in_range) out.turns.push_back(t.turns[i]);
  }
  return out;
}

LabelTable load_labels(std::string_view raw, const LabelColumns& columns) {
  const auto lines = lines_of(raw);
  if (lines.empty()) throw DataError("label file: missing header row");

  const auto header = split(lines[0], ',');
  std::optional<std::size_t> id_col, bin_col, score_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (name == columns.id) id_col = c;
    if (name == columns.binary) bin_col = c;
    if (name == columns.score) score_col = c;
  }
  if (!id_col || !bin_col) {
    throw DataError("label file: header must name columns '" + columns.id + "' and '" +
                    columns.binary + "'");
  }

  LabelTable table;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto where = "label file line " + std::to_string(i + 1);
    const auto fields = split(lines[i], ',');
    if (fields.size() != header.size()) throw DataError(where + ": wrong field count");
    const auto id = std::string(trim(fields[*id_col]));
    if (id.empty()) throw DataError(where + ": empty interview id");
    const auto binary = parse_long(fields[*bin_col]);
    if (!binary || (*binary != 0 && *binary != 1)) {
      throw DataError(where + ": binary label must be 0 or 1");
    }
    LabelEntry entry{*binary == 1 ? Label::depressed : Label::control, std::nullopt};
    if (score_col) {
      const auto score = parse_long(fields[*score_col]);
      if (score && *score >= 0) entry.severity = static_cast<int>(*score);
    }
    if (table.contains(id)) throw DataError(where + ": duplicate interview id '" + id + "'");
    table.add(id, entry);
  }
  return table;
}

std::string serialize_labels(const LabelTable& labels) {
  std::string out = "Participant_ID,PHQ8_Binary,PHQ8_Score\n";
  for (const auto& [id, entry] : labels.entries()) {
    out += id + "," + (entry.label == Label::depressed ? "1" : "0") + ",";
    if (entry.severity) out += std::to_string(*entry.severity);
    out += '\n';
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

namespace {

// Label files list ids in file order; LabelTable is keyed, so recover order
// from the raw text.
std::vector<std::string> ordered_ids(std::string_view raw, const LabelColumns& columns) {
  const auto lines = lines_of(raw);
  std::vector<std::string> ids;
  if (lines.empty()) return ids;
  const auto header = split(lines[0], ',');
  std::size_t id_col = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (trim(header[c]) == columns.id) id_col = c;
  }
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    ids.emplace_back(trim(split(lines[i], ',')[id_col]));
  }
  return ids;
}

Corpus load_split(const std::filesystem::path& root, const std::string& label_file, Split split,
                  const LabelColumns& columns, const std::vector<std::string>& speakers) {
  const auto raw = read_file(root / label_file);
  Corpus corpus;
  corpus.split = split;
  corpus.labels = load_labels(raw, columns);
  for (const auto& id : ordered_ids(raw, columns)) {
    const auto path = root / "transcripts" / (id + "_TRANSCRIPT.csv");
    corpus.transcripts.push_back(parse_transcript(read_file(path), id, speakers));
  }
  return corpus;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& root, const LabelColumns& columns) {
  Dataset data;
  data.train = load_split(root, "train_labels.csv", Split::train, columns, data.speakers);
  data.eval = load_split(root, "eval_labels.csv", Split::eval, columns, data.speakers);
  std::set<std::string> seen;
  for (const auto* c : {&data.train, &data.eval}) {
    for (const auto& t : c->transcripts) {
      if (!seen.insert(t.interview_id).second) {
        throw DataError("interview id '" + t.interview_id + "' appears in more than one split");
      }
    }
  }
  return data;
}

void write_dataset(const Dataset& data, const std::filesystem::path& root) {
  std::filesystem::create_directories(root / "transcripts");
  for (const auto* c : {&data.train, &data.eval}) {
    std::string labels = "Participant_ID,PHQ8_Binary,PHQ8_Score\n";
    for (const auto& t : c->transcripts) {
      write_file(root / "transcripts" / (t.interview_id + "_TRANSCRIPT.csv"),
                 serialize_transcript(t));
      const auto& entry = c->labels.entry(t.interview_id);
      labels += t.interview_id + "," + (entry.label == Label::depressed ? "1" : "0") + ",";
      if (entry.severity) labels += std::to_string(*entry.severity);
      labels += '\n';
    }
    write_file(root / (c->split == Split::train ? "train_labels.csv" : "eval_labels.csv"), labels);
  }
}

}  // namespace promptbias
