#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "promptbias/corpus.hpp"
#include "promptbias/gcn.hpp"
#include "promptbias/graph.hpp"

namespace promptbias {

struct Keyword {
  std::string word;
  double p_depressed = 0.0;
  bool operator==(const Keyword&) const = default;
};

/// Words whose depressed-class output probability exceeds 0.5, ordered by
/// descending probability then word.
class KeywordSet {
 public:
  KeywordSet() = default;
  explicit KeywordSet(std::vector<Keyword> items);

  const std::vector<Keyword>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  bool contains(const std::string& word) const { return lookup_.count(word) != 0; }
  bool operator==(const KeywordSet& other) const { return items_ == other.items_; }

 private:
  std::vector<Keyword> items_;
  std::unordered_set<std::string> lookup_;
};

/// Keywords from the word rows of an output matrix Z (rows = words first).
KeywordSet keywords_from_probabilities(const std::vector<std::string>& words, const Matrix<double>& z);
KeywordSet extract_keywords(const Model& model, const TextGraph& graph);

struct BinProfile {
  std::vector<double> proportion;
  std::vector<std::size_t> tokens;
  std::vector<std::size_t> keyword_tokens;
};

/// Keyword proportion of the selected speaker's tokens per progression bin.
BinProfile keyword_progression(const Transcript& t, const SpeakerFilter& filter,
                               const KeywordSet& keywords, std::size_t bins);

struct HeatmapMatrix {
  Eigen::MatrixXd values;  // interviews x bins
  std::vector<std::string> row_ids;
  std::vector<Label> row_labels;
  std::vector<std::size_t> row_tokens;
  /// Index of the first evaluation row.
  std::size_t split_row = 0;
  std::size_t bins = 0;
  std::size_t smoothing = 1;
  std::string speaker;
};

/// Rows: train block then eval block, each with depressed interviews before
/// control ones (corpus order kept within a group).
HeatmapMatrix build_heatmap(const Dataset& data, const SpeakerFilter& filter,
                            const KeywordSet& keywords, std::size_t bins, std::size_t smoothing = 1);

/// Centred moving average along bins; width 1 leaves the row unchanged.
std::vector<double> smooth_bins(const std::vector<double>& values, std::size_t width);

struct TurnColor {
  std::string speaker;
  std::size_t tokens = 0;
  double proportion = 0.0;
  /// Token positions (within the turn) that are keywords.
  std::vector<std::size_t> keyword_positions;
};

std::vector<TurnColor> turn_coloring(const Transcript& t, const KeywordSet& keywords);

struct RowLocalization {
  double after_fraction = 0.0;
  double entropy = 1.0;
  bool all_zero = false;
};

struct GroupLocalization {
  std::size_t rows = 0;
  std::size_t zero_rows = 0;
  /// Keyword mass after the split pooled over the group's rows.
  double after_fraction = 0.0;
  double mean_entropy = 0.0;
};

struct LocalizationStats {
  double split_frac = 0.5;
  std::vector<RowLocalization> rows;
  std::map<Label, GroupLocalization> groups;
};

RowLocalization localize_row(const Eigen::Ref<const Eigen::VectorXd>& row, double split_frac);
LocalizationStats localization_stats(const HeatmapMatrix& h, double split_frac = 0.5);

}  // namespace promptbias
